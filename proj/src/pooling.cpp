// SPDX-License-Identifier: Apache-2.0

#include "mivc/pooling.hpp"

#include <cmath>
#include <stdexcept>

namespace mivc {

Bag Bag::from_rows(std::vector<std::vector<double>> rows, std::string id,
                   std::optional<int> label) {
  Bag bag;
  bag.id = std::move(id);
  bag.label = label;
  bag.instances.reserve(rows.size());
  for (auto& r : rows) bag.instances.push_back({Vector(std::move(r)), std::nullopt});
  return bag;
}

void Bag::validate() const {
  if (instances.empty()) throw UsageError("bag '" + id + "' has no instances");
  const auto& first = instances.front();
  if (first.dim() == 0) throw ShapeError("bag '" + id + "' has a zero-length instance");
  for (std::size_t n = 0; n < instances.size(); ++n) {
    const auto& inst = instances[n];
    if (inst.dim() != first.dim()) {
      throw ShapeError("bag '" + id + "': instance " + std::to_string(n) + " has dim " +
                       std::to_string(inst.dim()) + ", expected " + std::to_string(first.dim()));
    }
    if (inst.shape != first.shape) {
      throw ShapeError("bag '" + id + "': instance " + std::to_string(n) +
                       " shape differs from instance 0");
    }
    if (inst.shape && inst.shape->size() != inst.dim()) {
      throw ShapeError("bag '" + id + "': instance " + std::to_string(n) +
                       " shape does not match its length");
    }
  }
}

Bag permuted(const Bag& bag, const std::vector<std::size_t>& order) {
  if (order.size() != bag.size()) throw UsageError("permutation length differs from bag size");
  Bag out = bag;
  for (std::size_t i = 0; i < order.size(); ++i) out.instances[i] = bag.instances.at(order[i]);
  return out;
}

std::string_view to_string(PoolingKind kind) {
  switch (kind) {
    case PoolingKind::kAvg: return "avg";
    case PoolingKind::kMax: return "max";
    case PoolingKind::kAttn: return "attn";
    case PoolingKind::kGated: return "gated";
  }
  return "?";
}

PoolingKind parse_pooling_kind(std::string_view name) {
  if (name == "avg") return PoolingKind::kAvg;
  if (name == "max") return PoolingKind::kMax;
  if (name == "attn") return PoolingKind::kAttn;
  if (name == "gated") return PoolingKind::kGated;
  throw UsageError("unknown pooling kind '" + std::string(name) + "'");
}

bool is_attention(PoolingKind kind) noexcept {
  return kind == PoolingKind::kAttn || kind == PoolingKind::kGated;
}

PoolingParams PoolingParams::parameter_free(PoolingKind kind) {
  if (is_attention(kind)) {
    throw UsageError(std::string(to_string(kind)) + " pooling has learnable parameters");
  }
  PoolingParams p;
  p.kind = kind;
  return p;
}

PoolingParams PoolingParams::zeros(PoolingKind kind, std::size_t hidden, std::size_t dim) {
  if (!is_attention(kind)) return parameter_free(kind);
  PoolingParams p;
  p.kind = kind;
  p.hidden = hidden;
  p.dim = dim;
  p.w = Vector(hidden);
  p.Z = Matrix(hidden, dim);
  if (kind == PoolingKind::kGated) p.G = Matrix(hidden, dim);
  return p;
}

PoolingParams PoolingParams::random(PoolingKind kind, std::size_t hidden, std::size_t dim,
                                    Rng& rng) {
  PoolingParams p = zeros(kind, hidden, dim);
  if (!is_attention(kind)) return p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& x : p.w) x = rng.uniform(-bound, bound);
  for (double& x : p.Z.span()) x = rng.uniform(-bound, bound);
  for (double& x : p.G.span()) x = rng.uniform(-bound, bound);
  return p;
}

void PoolingParams::validate() const {
  if (!is_attention(kind)) {
    if (!w.empty() || !Z.empty() || !G.empty()) {
      throw ShapeError(std::string(to_string(kind)) + " pooling carries no learnable arrays");
    }
    return;
  }
  if (hidden == 0 || dim == 0) throw ShapeError("attention pooling needs K > 0 and M > 0");
  if (w.size() != hidden) {
    throw ShapeError("w has length " + std::to_string(w.size()) + ", expected K=" +
                     std::to_string(hidden));
  }
  if (Z.rows() != hidden || Z.cols() != dim) {
    throw ShapeError("Z is " + shape_string(Z) + ", expected (" + std::to_string(hidden) + "x" +
                     std::to_string(dim) + ")");
  }
  if (kind == PoolingKind::kGated) {
    if (G.rows() != hidden || G.cols() != dim) {
      throw ShapeError("G is " + shape_string(G) + ", expected (" + std::to_string(hidden) +
                       "x" + std::to_string(dim) + ")");
    }
  } else if (!G.empty()) {
    throw ShapeError("attn pooling carries no G matrix");
  }
}

std::size_t PoolingParams::parameter_count() const noexcept {
  return w.size() + Z.size() + G.size();
}

PooledOutput pool_avg(const Bag& bag) {
  bag.validate();
  const std::size_t n_inst = bag.size();
  Vector sum(bag.dim());
  for (const auto& inst : bag.instances) axpy(1.0, inst.values, sum.span());
  const double n = static_cast<double>(n_inst);
  for (double& x : sum) x /= n;
  return {std::move(sum), Vector(n_inst, 1.0 / n), std::nullopt};
}

PooledOutput pool_max(const Bag& bag) {
  bag.validate();
  Vector E = bag[0];
  std::vector<std::size_t> argmax(bag.dim(), 0);
  for (std::size_t n = 1; n < bag.size(); ++n) {
    const auto& e = bag[n];
    for (std::size_t m = 0; m < E.size(); ++m) {
      if (e[m] > E[m]) {
        E[m] = e[m];
        argmax[m] = n;
      }
    }
  }
  return {std::move(E), std::nullopt, std::move(argmax)};
}

namespace {

void require_attention(const PoolingParams& params, const Bag& bag) {
  if (!is_attention(params.kind)) {
    throw UsageError("attention scoring requires attn or gated pooling, got " +
                     std::string(to_string(params.kind)));
  }
  params.validate();
  bag.validate();
  if (bag.dim() != params.dim) {
    throw ShapeError("bag '" + bag.id + "' has M=" + std::to_string(bag.dim()) +
                     " but pooling params expect M=" + std::to_string(params.dim));
  }
}

// Intermediate activations of the scoring network for one instance.
struct ScoreTrace {
  Vector t;  // tanh(Z e)
  Vector g;  // sigm(G e), gated only
  Vector h;  // t, or t * g
  double s = 0.0;
};

ScoreTrace score_one(const PoolingParams& params, const Vector& e) {
  ScoreTrace tr;
  tr.t = tanh_vec(matvec(params.Z, e));
  if (params.kind == PoolingKind::kGated) {
    tr.g = sigm_vec(matvec(params.G, e));
    tr.h = hadamard(tr.t, tr.g);
  } else {
    tr.h = tr.t;
  }
  tr.s = dot(params.w, tr.h);
  return tr;
}

Vector weighted_sum(const Bag& bag, const Vector& alpha) {
  Vector E(bag.dim());
  for (std::size_t n = 0; n < bag.size(); ++n) axpy(alpha[n], bag[n], E.span());
  return E;
}

}  // namespace

Vector attention_scores(const PoolingParams& params, const Bag& bag) {
  require_attention(params, bag);
  Vector s(bag.size());
  for (std::size_t n = 0; n < bag.size(); ++n) s[n] = score_one(params, bag[n]).s;
  return s;
}

PooledOutput pool_attention(const PoolingParams& params, const Bag& bag) {
  Vector alpha = softmax_stable(attention_scores(params, bag));
  Vector E = weighted_sum(bag, alpha);
  return {std::move(E), std::move(alpha), std::nullopt};
}

PooledOutput pool(const PoolingParams& params, const Bag& bag) {
  switch (params.kind) {
    case PoolingKind::kAvg: return pool_avg(bag);
    case PoolingKind::kMax: return pool_max(bag);
    case PoolingKind::kAttn:
    case PoolingKind::kGated: return pool_attention(params, bag);
  }
  throw UsageError("unknown pooling kind");
}

PoolGradients pool_backward(const PoolingParams& params, const Bag& bag,
                            std::span<const double> upstream_dE) {
  bag.validate();
  if (upstream_dE.size() != bag.dim()) {
    throw ShapeError("upstream gradient has length " + std::to_string(upstream_dE.size()) +
                     ", bag has M=" + std::to_string(bag.dim()));
  }
  const std::size_t n_inst = bag.size();
  PoolGradients grads;
  grads.d_instances.assign(n_inst, Vector(bag.dim()));

  if (params.kind == PoolingKind::kAvg) {
    const double n = static_cast<double>(n_inst);
    for (auto& d : grads.d_instances) {
      for (std::size_t m = 0; m < d.size(); ++m) d[m] = upstream_dE[m] / n;
    }
    return grads;
  }
  if (params.kind == PoolingKind::kMax) {
    const auto argmax = *pool_max(bag).argmax_index;
    for (std::size_t m = 0; m < argmax.size(); ++m) {
      grads.d_instances[argmax[m]][m] = upstream_dE[m];
    }
    return grads;
  }

  require_attention(params, bag);
  const bool gated = params.kind == PoolingKind::kGated;

  std::vector<ScoreTrace> traces;
  traces.reserve(n_inst);
  Vector scores(n_inst);
  for (std::size_t n = 0; n < n_inst; ++n) {
    traces.push_back(score_one(params, bag[n]));
    scores[n] = traces.back().s;
  }
  const Vector alpha = softmax_stable(scores);
  const Vector E = weighted_sum(bag, alpha);

  // dL/ds_n = alpha_n (u . e_n - u . E) through the softmax.
  const double u_dot_E = dot(upstream_dE, E);

  grads.d_w = Vector(params.hidden);
  grads.d_Z = Matrix(params.hidden, params.dim);
  if (gated) grads.d_G = Matrix(params.hidden, params.dim);

  for (std::size_t n = 0; n < n_inst; ++n) {
    const auto& e = bag[n];
    const auto& tr = traces[n];
    const double ds = alpha[n] * (dot(upstream_dE, e) - u_dot_E);

    axpy(ds, tr.h, grads.d_w->span());

    // dL/dh = ds * w; split across the tanh and (optional) gate branches.
    Vector d_pre_z(params.hidden);
    Vector d_pre_g;
    if (gated) d_pre_g = Vector(params.hidden);
    for (std::size_t k = 0; k < params.hidden; ++k) {
      const double dh = ds * params.w[k];
      const double t = tr.t[k];
      if (gated) {
        const double g = tr.g[k];
        d_pre_z[k] = dh * g * (1.0 - t * t);
        d_pre_g[k] = dh * t * g * (1.0 - g);
      } else {
        d_pre_z[k] = dh * (1.0 - t * t);
      }
    }
    add_outer(1.0, d_pre_z, e, *grads.d_Z);

    // E depends on e_n directly (alpha_n u) and through the scores.
    auto& de = grads.d_instances[n];
    axpy(alpha[n], upstream_dE, de.span());
    axpy(1.0, matvec_transposed(params.Z, d_pre_z), de.span());
    if (gated) {
      add_outer(1.0, d_pre_g, e, *grads.d_G);
      axpy(1.0, matvec_transposed(params.G, d_pre_g), de.span());
    }
  }
  return grads;
}

InstanceEmbedding flatten(const InstanceEmbedding& inst) {
  if (!inst.shape) throw ShapeError("flatten: instance has no 2-D shape");
  if (inst.shape->size() != inst.dim()) {
    throw ShapeError("flatten: shape (" + std::to_string(inst.shape->patches) + "," +
                     std::to_string(inst.shape->dims) + ") does not match length " +
                     std::to_string(inst.dim()));
  }
  return {inst.values, std::nullopt};
}

InstanceEmbedding unflatten(const InstanceEmbedding& inst, Shape2D shape) {
  if (shape.size() != inst.dim() || shape.size() == 0) {
    throw ShapeError("unflatten: length " + std::to_string(inst.dim()) +
                     " cannot be viewed as (" + std::to_string(shape.patches) + "," +
                     std::to_string(shape.dims) + ")");
  }
  return {inst.values, shape};
}

InstanceEmbedding pool_shaped(const PoolingParams& params, const Bag& bag,
                              PooledOutput* details) {
  bag.validate();
  const auto shape = bag.instances.front().shape;
  if (!shape) throw UsageError("pool_shaped: bag '" + bag.id + "' holds unshaped instances");
  Bag flat = bag;
  for (auto& inst : flat.instances) inst = flatten(inst);
  PooledOutput out = pool(params, flat);
  InstanceEmbedding result = unflatten({out.E, std::nullopt}, *shape);
  if (details) *details = std::move(out);
  return result;
}

}  // namespace mivc
