// SPDX-License-Identifier: Apache-2.0

#include "mivc/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mivc/io_util.hpp"

namespace mivc {

namespace {

struct Record {
  std::vector<std::size_t> dims;
  std::vector<double> values;
};

void put_record(io::ByteWriter& w, std::string_view name, const std::vector<std::size_t>& dims,
                std::span<const double> values) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) w.u32(static_cast<std::uint32_t>(d));
  for (double v : values) w.f64(v);
}

double code(std::size_t v) { return static_cast<double>(v); }

std::size_t strategy_code(Strategy s) {
  const auto& all = all_strategies();
  return static_cast<std::size_t>(std::find(all.begin(), all.end(), s) - all.begin());
}

[[noreturn]] void invalid(const std::string& context, const std::string& what) {
  throw LoadError(LoadErrorKind::kValidation, context + ": " + what);
}

std::size_t as_index(double v, const std::string& context, std::string_view field) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e9) {
    invalid(context, "field " + std::string(field) + " is not a small non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string encode_checkpoint(const Model& model) {
  Model copy = model;
  const auto slots = parameter_slots(copy);

  std::vector<std::pair<std::string, std::vector<double>>> meta;
  meta.push_back({"meta.strategy", {code(strategy_code(model.strategy))}});
  meta.push_back({"meta.encoder",
                  {code(model.encoder.kind == EncoderKind::kMlp1), code(model.encoder.in_dim),
                   code(model.encoder.out_dim), code(model.encoder.frozen)}});
  meta.push_back({"meta.pooling",
                  {code(static_cast<std::size_t>(model.pooling.kind)), code(model.pooling.hidden),
                   code(model.pooling.dim), code(model.pooling_frozen)}});
  meta.push_back({"meta.concat",
                  {code(model.concat.max_images), code(model.concat.hidden_dim),
                   code(model.concat.dim)}});
  meta.push_back({"meta.head", {code(model.head.classes()), code(model.head.W.cols()),
                                code(model.head.frozen)}});
  if (model.instance_shape) {
    meta.push_back({"meta.instance_shape",
                    {code(model.instance_shape->patches), code(model.instance_shape->dims)}});
  }

  io::ByteWriter w;
  w.bytes({kCheckpointMagic, 4});
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(meta.size() + slots.size()));
  for (const auto& [name, values] : meta) put_record(w, name, {values.size()}, values);
  for (const auto& slot : slots) put_record(w, slot.name, slot.dims, slot.values);
  return w.take();
}

Model decode_checkpoint(std::string_view bytes, const std::string& context) {
  io::ByteReader r(bytes, context);
  if (r.remaining() < 4 || r.bytes(4) != std::string_view(kCheckpointMagic, 4)) {
    throw LoadError(LoadErrorKind::kBadMagic, context + ": not an MIVM checkpoint");
  }
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw LoadError(LoadErrorKind::kBadVersion,
                    context + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, Record> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name(r.bytes(name_len));
    const std::uint32_t rank = r.u32();
    if (rank != 1 && rank != 2) invalid(context, "record '" + name + "' has rank " + std::to_string(rank));
    Record rec;
    std::size_t total = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      rec.dims.push_back(r.u32());
      total *= rec.dims.back();
    }
    if (total == 0) invalid(context, "record '" + name + "' is empty");
    if (total > r.remaining() / 8) {
      throw LoadError(LoadErrorKind::kTruncated, context + ": record '" + name + "' payload");
    }
    rec.values.resize(total);
    for (double& v : rec.values) v = r.f64();
    if (!all_finite(rec.values)) {
      throw LoadError(LoadErrorKind::kNonFinite, context + ": record '" + name + "'");
    }
    if (!records.emplace(name, std::move(rec)).second) {
      invalid(context, "duplicate record '" + name + "'");
    }
  }
  if (r.remaining() != 0) invalid(context, "trailing bytes after last record");

  auto take = [&](const std::string& name, std::size_t length) -> std::vector<double> {
    auto it = records.find(name);
    if (it == records.end()) invalid(context, "missing record '" + name + "'");
    if (it->second.values.size() != length) {
      invalid(context, "record '" + name + "' has " + std::to_string(it->second.values.size()) +
                           " values, expected " + std::to_string(length));
    }
    auto values = std::move(it->second.values);
    records.erase(it);
    return values;
  };
  auto field = [&](const std::vector<double>& v, std::size_t i, std::string_view label) {
    return as_index(v[i], context, label);
  };

  Model model;
  const auto strategy = take("meta.strategy", 1);
  const std::size_t s = field(strategy, 0, "strategy");
  if (s >= all_strategies().size()) invalid(context, "unknown strategy code");
  model.strategy = all_strategies()[s];

  const auto enc = take("meta.encoder", 4);
  model.encoder.kind = field(enc, 0, "encoder.kind") ? EncoderKind::kMlp1 : EncoderKind::kIdentity;
  model.encoder.in_dim = field(enc, 1, "encoder.in_dim");
  model.encoder.out_dim = field(enc, 2, "encoder.out_dim");
  model.encoder.frozen = field(enc, 3, "encoder.frozen") != 0;

  const auto pool = take("meta.pooling", 4);
  const std::size_t pk = field(pool, 0, "pooling.kind");
  if (pk > 3) invalid(context, "unknown pooling kind code");
  model.pooling.kind = static_cast<PoolingKind>(pk);
  model.pooling.hidden = field(pool, 1, "pooling.K");
  model.pooling.dim = field(pool, 2, "pooling.M");
  model.pooling_frozen = field(pool, 3, "pooling.frozen") != 0;

  const auto concat = take("meta.concat", 3);
  model.concat.max_images = field(concat, 0, "concat.max_images");
  model.concat.hidden_dim = field(concat, 1, "concat.hidden_dim");
  model.concat.dim = field(concat, 2, "concat.M");

  const auto head = take("meta.head", 3);
  const std::size_t classes = field(head, 0, "head.classes");
  const std::size_t head_dim = field(head, 1, "head.M");
  model.head.frozen = field(head, 2, "head.frozen") != 0;

  if (records.count("meta.instance_shape")) {
    const auto shape = take("meta.instance_shape", 2);
    model.instance_shape = Shape2D{field(shape, 0, "shape.P"), field(shape, 1, "shape.D")};
  }

  auto matrix = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols, take(name, rows * cols));
  };
  auto vector = [&](const std::string& name, std::size_t n) { return Vector(take(name, n)); };

  try {
    if (model.encoder.kind == EncoderKind::kMlp1) {
      model.encoder.W = matrix("encoder.W", model.encoder.out_dim, model.encoder.in_dim);
      model.encoder.b = vector("encoder.b", model.encoder.out_dim);
    }
    if (is_attention(model.pooling.kind)) {
      model.pooling.w = vector("pooling.w", model.pooling.hidden);
      model.pooling.Z = matrix("pooling.Z", model.pooling.hidden, model.pooling.dim);
      if (model.pooling.kind == PoolingKind::kGated) {
        model.pooling.G = matrix("pooling.G", model.pooling.hidden, model.pooling.dim);
      }
    }
    if (records.count("concat.W1")) {
      model.concat.W1 = matrix("concat.W1", model.concat.hidden_dim,
                               model.concat.max_images * model.concat.dim);
      model.concat.W2 = matrix("concat.W2", model.concat.dim, model.concat.hidden_dim);
    }
    model.head.W = matrix("head.W", classes, head_dim);
    model.head.b = vector("head.b", classes);
    model.pooling.validate();
  } catch (const ShapeError& e) {
    invalid(context, e.what());
  }
  if (!records.empty()) invalid(context, "unexpected record '" + records.begin()->first + "'");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  io::write_file_atomic(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace mivc
