// SPDX-License-Identifier: Apache-2.0

#include "mivc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace mivc {

namespace {

constexpr Strategy kAllStrategies[] = {Strategy::kSingle, Strategy::kConcatGrid,
                                       Strategy::kConcatEmbed, Strategy::kAvg,
                                       Strategy::kMax,        Strategy::kAttn,
                                       Strategy::kGated};

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kSingle: return "single";
    case Strategy::kConcatGrid: return "concat-grid";
    case Strategy::kConcatEmbed: return "concat-embed";
    case Strategy::kAvg: return "avg";
    case Strategy::kMax: return "max";
    case Strategy::kAttn: return "attn";
    case Strategy::kGated: return "gated";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw UsageError("unknown strategy '" + std::string(name) +
                   "' (expected single, concat-grid, concat-embed, avg, max, attn, gated)");
}

std::optional<PoolingKind> pooling_kind_of(Strategy s) noexcept {
  switch (s) {
    case Strategy::kAvg: return PoolingKind::kAvg;
    case Strategy::kMax: return PoolingKind::kMax;
    case Strategy::kAttn: return PoolingKind::kAttn;
    case Strategy::kGated: return PoolingKind::kGated;
    default: return std::nullopt;
  }
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all(std::begin(kAllStrategies), std::end(kAllStrategies));
  return all;
}

std::string_view to_string(EncoderKind k) {
  return k == EncoderKind::kIdentity ? "identity" : "mlp1";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "identity") return EncoderKind::kIdentity;
  if (name == "mlp1") return EncoderKind::kMlp1;
  throw UsageError("unknown encoder kind '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw UsageError("unknown optimizer '" + std::string(name) + "'");
}

Vector EncoderParams::encode(std::span<const double> x) const {
  if (x.size() != in_dim) {
    throw ShapeError("encoder expects M_in=" + std::to_string(in_dim) + ", got " +
                     std::to_string(x.size()));
  }
  if (kind == EncoderKind::kIdentity) return Vector(std::vector<double>(x.begin(), x.end()));
  Vector pre = matvec(W, x);
  axpy(1.0, b, pre.span());
  return tanh_vec(pre);
}

void TrainConfig::validate() const {
  if (in_dim == 0 || dim == 0) throw UsageError("M_in and M must be positive");
  if (classes < 2) throw UsageError("need at least 2 classes");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning_rate must be finite and non-negative");
  }
  if (epochs == 0) throw UsageError("epochs must be >= 1");
  if (batch_size == 0) throw UsageError("batch_size must be >= 1");
  if (encoder == EncoderKind::kIdentity && in_dim != dim) {
    throw UsageError("identity encoder needs M_in == M");
  }
  if (auto kind = pooling_kind_of(strategy); kind && is_attention(*kind) && hidden == 0) {
    throw UsageError("attention pooling needs K >= 1");
  }
  if (strategy == Strategy::kConcatEmbed && (max_images == 0 || concat_hidden == 0)) {
    throw UsageError("concat-embed needs max_images >= 1 and concat_hidden >= 1");
  }
  if (instance_shape && instance_shape->size() != in_dim) {
    throw UsageError("instance_shape does not multiply out to M_in");
  }
}

std::vector<ParamSlot> parameter_slots(Model& model) {
  std::vector<ParamSlot> slots;
  auto add_matrix = [&](const char* name, Matrix& m, bool trainable) {
    if (!m.empty()) slots.push_back({name, {m.rows(), m.cols()}, m.span(), trainable});
  };
  auto add_vector = [&](const char* name, Vector& v, bool trainable) {
    if (!v.empty()) slots.push_back({name, {v.size()}, v.span(), trainable});
  };
  const bool enc = !model.encoder.frozen;
  const bool pool = !model.pooling_frozen;
  add_matrix("encoder.W", model.encoder.W, enc);
  add_vector("encoder.b", model.encoder.b, enc);
  add_vector("pooling.w", model.pooling.w, pool);
  add_matrix("pooling.Z", model.pooling.Z, pool);
  add_matrix("pooling.G", model.pooling.G, pool);
  add_matrix("concat.W1", model.concat.W1, pool);
  add_matrix("concat.W2", model.concat.W2, pool);
  add_matrix("head.W", model.head.W, !model.head.frozen);
  add_vector("head.b", model.head.b, !model.head.frozen);
  return slots;
}

const NamedArray* ModelGradients::find(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

Model init_model(const TrainConfig& config, Rng& rng) {
  config.validate();
  Model model;
  model.strategy = config.strategy;
  model.instance_shape = config.instance_shape;

  auto& enc = model.encoder;
  enc.kind = config.encoder;
  enc.in_dim = config.in_dim;
  enc.out_dim = config.dim;
  enc.frozen = config.freeze_encoder;
  if (enc.kind == EncoderKind::kMlp1) {
    enc.W = Matrix(config.dim, config.in_dim);
    enc.b = Vector(config.dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.in_dim));
    for (double& x : enc.W.span()) x = rng.uniform(-bound, bound);
  }

  if (auto kind = pooling_kind_of(config.strategy)) {
    model.pooling = PoolingParams::random(*kind, config.hidden, config.dim, rng);
  } else {
    model.pooling = PoolingParams::parameter_free(PoolingKind::kAvg);
  }
  if (config.strategy == Strategy::kConcatEmbed) {
    model.concat =
        ConcatProjParams::random(config.max_images, config.concat_hidden, config.dim, rng);
  }
  model.pooling_frozen = config.freeze_pooling;

  model.head.W = Matrix(config.classes, config.dim);
  model.head.b = Vector(config.classes);
  model.head.frozen = config.freeze_head;
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.dim));
  for (double& x : model.head.W.span()) x = rng.uniform(-bound, bound);
  return model;
}

namespace {

struct Trace {
  Bag inputs;       // what the encoder saw (the resized grid for concat-grid)
  Bag encoded;
  PooledOutput pooled;
  Vector logits;
};

Bag with_shape(const Bag& bag, Shape2D shape) {
  Bag out = bag;
  for (auto& inst : out.instances) {
    if (!inst.shape) inst = unflatten(inst, shape);
  }
  return out;
}

Trace run_forward(const Model& model, const Bag& bag) {
  bag.validate();
  Trace tr;
  if (model.strategy == Strategy::kConcatGrid) {
    const Shape2D cell = model.instance_shape.value_or(Shape2D{bag.dim(), 1});
    const Bag shaped = with_shape(bag, cell);
    const GridSpec grid = grid_spec_for(shaped.size());
    InstanceEmbedding resized = grid_resize(grid_concat(shaped), grid.side);
    tr.inputs.id = bag.id;
    tr.inputs.instances.push_back({resized.values, std::nullopt});
  } else {
    tr.inputs = bag;
  }

  tr.encoded.id = bag.id;
  tr.encoded.instances.reserve(tr.inputs.size());
  for (const auto& inst : tr.inputs.instances) {
    tr.encoded.instances.push_back({model.encoder.encode(inst.values), std::nullopt});
  }

  switch (model.strategy) {
    case Strategy::kSingle: tr.pooled = single_first(tr.encoded); break;
    case Strategy::kConcatGrid: tr.pooled = {tr.encoded[0], std::nullopt, std::nullopt}; break;
    case Strategy::kConcatEmbed:
      tr.pooled = {concat_project(model.concat, tr.encoded), std::nullopt, std::nullopt};
      break;
    default: tr.pooled = pool(model.pooling, tr.encoded); break;
  }

  if (tr.pooled.E.size() != model.head.W.cols()) {
    throw ShapeError("head expects M=" + std::to_string(model.head.W.cols()) + ", pooled M=" +
                     std::to_string(tr.pooled.E.size()));
  }
  tr.logits = matvec(model.head.W, tr.pooled.E);
  axpy(1.0, model.head.b, tr.logits.span());
  return tr;
}

Model zeros_like(const Model& model) {
  Model z = model;
  for (auto& slot : parameter_slots(z)) std::fill(slot.values.begin(), slot.values.end(), 0.0);
  return z;
}

Vector softmax_probs(std::span<const double> logits) { return softmax_stable(logits); }

// Accumulates dLoss/dParams into `g` for one bag given dLoss/dlogits.
void backward_one(const Model& model, const Trace& tr, std::span<const double> d_logits,
                  Model& g) {
  if (!model.head.frozen) {
    add_outer(1.0, d_logits, tr.pooled.E, g.head.W);
    axpy(1.0, d_logits, g.head.b.span());
  }
  const Vector dE = matvec_transposed(model.head.W, d_logits);

  const bool need_inputs = !model.encoder.frozen && model.encoder.kind == EncoderKind::kMlp1;
  std::vector<Vector> d_encoded;

  switch (model.strategy) {
    case Strategy::kSingle:
      if (need_inputs) {
        d_encoded.assign(tr.encoded.size(), Vector(tr.encoded.dim()));
        d_encoded[0] = dE;
      }
      break;
    case Strategy::kConcatGrid:
      if (need_inputs) d_encoded = {dE};
      break;
    case Strategy::kConcatEmbed: {
      if (model.pooling_frozen && !need_inputs) break;
      auto cg = concat_project_backward(model.concat, tr.encoded, dE);
      if (!model.pooling_frozen) {
        axpy(1.0, cg.d_W1.span(), g.concat.W1.span());
        axpy(1.0, cg.d_W2.span(), g.concat.W2.span());
      }
      d_encoded = std::move(cg.d_instances);
      break;
    }
    default: {
      const bool attention = is_attention(model.pooling.kind);
      if (!need_inputs && (!attention || model.pooling_frozen)) break;
      auto pg = pool_backward(model.pooling, tr.encoded, dE);
      if (attention && !model.pooling_frozen) {
        axpy(1.0, pg.d_w->span(), g.pooling.w.span());
        axpy(1.0, pg.d_Z->span(), g.pooling.Z.span());
        if (pg.d_G) axpy(1.0, pg.d_G->span(), g.pooling.G.span());
      }
      d_encoded = std::move(pg.d_instances);
      break;
    }
  }

  if (!need_inputs) return;
  for (std::size_t n = 0; n < d_encoded.size(); ++n) {
    const auto& e = tr.encoded[n];
    Vector d_pre(e.size());
    for (std::size_t m = 0; m < e.size(); ++m) d_pre[m] = d_encoded[n][m] * (1.0 - e[m] * e[m]);
    add_outer(1.0, d_pre, tr.inputs[n], g.encoder.W);
    axpy(1.0, d_pre, g.encoder.b.span());
  }
}

std::size_t label_of(const Bag& bag, std::size_t classes) {
  if (!bag.label) throw DataError("bag '" + bag.id + "' has no label");
  if (*bag.label < 0 || static_cast<std::size_t>(*bag.label) >= classes) {
    throw DataError("bag '" + bag.id + "' label " + std::to_string(*bag.label) +
                    " outside [0, " + std::to_string(classes) + ")");
  }
  return static_cast<std::size_t>(*bag.label);
}

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config) : config_(config) {}

  void step(Model& model, const ModelGradients& grads) {
    ++t_;
    for (auto& slot : parameter_slots(model)) {
      if (!slot.trainable) continue;
      const NamedArray* g = grads.find(slot.name);
      if (!g) continue;
      if (config_.optimizer == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < slot.values.size(); ++i) {
          slot.values[i] -= config_.learning_rate * g->values[i];
        }
        continue;
      }
      auto& st = state_[slot.name];
      if (st.m.empty()) {
        st.m.assign(slot.values.size(), 0.0);
        st.v.assign(slot.values.size(), 0.0);
      }
      const double b1 = config_.adam_beta1;
      const double b2 = config_.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      for (std::size_t i = 0; i < slot.values.size(); ++i) {
        const double gi = g->values[i];
        st.m[i] = b1 * st.m[i] + (1.0 - b1) * gi;
        st.v[i] = b2 * st.v[i] + (1.0 - b2) * gi * gi;
        const double m_hat = st.m[i] / c1;
        const double v_hat = st.v[i] / c2;
        slot.values[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.adam_epsilon);
      }
    }
  }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  const TrainConfig& config_;
  std::unordered_map<std::string, Moments> state_;
  std::uint64_t t_ = 0;
};

}  // namespace

ForwardResult forward(const Model& model, const Bag& bag) {
  Trace tr = run_forward(model, bag);
  return {std::move(tr.logits), std::move(tr.pooled)};
}

std::size_t predict(const Model& model, const Bag& bag) {
  const Vector logits = forward(model, bag).logits;
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw UsageError("label outside logits");
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - hi);
  return -(logits[label] - hi - std::log(total));
}

LossAndGrads loss_and_grads(const Model& model, std::span<const Bag> batch) {
  if (batch.empty()) throw DataError("empty batch");
  const std::size_t classes = model.head.classes();
  Model g = zeros_like(model);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const Bag& bag : batch) {
    const std::size_t label = label_of(bag, classes);
    const Trace tr = run_forward(model, bag);
    loss += cross_entropy(tr.logits, label);
    Vector d_logits = softmax_probs(tr.logits);
    d_logits[label] -= 1.0;
    for (double& x : d_logits) x *= scale;
    backward_one(model, tr, d_logits, g);
  }

  LossAndGrads out;
  out.loss = loss * scale;
  for (const auto& slot : parameter_slots(g)) {
    if (!slot.trainable) continue;
    out.grads.arrays.push_back({slot.name, {slot.values.begin(), slot.values.end()}});
  }
  return out;
}

TrainResult train(const TrainConfig& config, std::span<const Bag> train_set) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");

  Rng rng(config.seed);
  TrainResult result;
  result.model = init_model(config, rng);
  result.initial = result.model;
  Optimizer optimizer(config);

  std::vector<std::size_t> order(train_set.size());
  std::vector<Bag> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      LossAndGrads lg = loss_and_grads(result.model, batch);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      optimizer.step(result.model, lg.grads);
    }
    std::size_t correct = 0;
    for (const Bag& bag : train_set) {
      if (predict(result.model, bag) == label_of(bag, config.classes)) ++correct;
    }
    result.history.push_back({epoch + 1, loss_sum / static_cast<double>(train_set.size()),
                              static_cast<double>(correct) /
                                  static_cast<double>(train_set.size())});
  }
  return result;
}

ParamReport count_params(const TrainConfig& config) {
  config.validate();
  ParamReport r;
  if (config.encoder == EncoderKind::kMlp1) r.encoder = config.dim * config.in_dim + config.dim;
  if (config.strategy == Strategy::kAttn) r.pooling = config.hidden * (config.dim + 1);
  if (config.strategy == Strategy::kGated) r.pooling = config.hidden * (2 * config.dim + 1);
  if (config.strategy == Strategy::kConcatEmbed) {
    r.concat_projection = config.concat_hidden * config.max_images * config.dim +
                          config.dim * config.concat_hidden;
  }
  r.head = config.classes * config.dim + config.classes;
  r.baseline_total = r.encoder + r.head;
  r.extra_over_baseline = r.pooling + r.concat_projection;
  r.total = r.baseline_total + r.extra_over_baseline;
  return r;
}

}  // namespace mivc
