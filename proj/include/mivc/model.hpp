// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale end-to-end model: a per-instance encoder (frozen by default),
// a bag aggregator (one of the pooling kinds or a baseline), and a linear
// classification head trained with softmax cross-entropy.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mivc/baselines.hpp"
#include "mivc/pooling.hpp"

namespace mivc {

/// How a bag is reduced to one embedding before the head.
enum class Strategy { kSingle, kConcatGrid, kConcatEmbed, kAvg, kMax, kAttn, kGated };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);
std::optional<PoolingKind> pooling_kind_of(Strategy s) noexcept;
/// All seven strategies in benchmark row order.
const std::vector<Strategy>& all_strategies();

enum class EncoderKind { kIdentity, kMlp1 };
std::string_view to_string(EncoderKind k);
EncoderKind parse_encoder_kind(std::string_view name);

enum class OptimizerKind { kSgd, kAdam };
std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer_kind(std::string_view name);

/// e = x (identity) or e = tanh(W x + b) (mlp1).
struct EncoderParams {
  EncoderKind kind = EncoderKind::kIdentity;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Matrix W;
  Vector b;
  bool frozen = true;

  Vector encode(std::span<const double> x) const;
  bool operator==(const EncoderParams&) const = default;
};

struct HeadParams {
  Matrix W;  // C x M
  Vector b;  // C
  bool frozen = false;

  std::size_t classes() const noexcept { return b.size(); }
  bool operator==(const HeadParams&) const = default;
};

struct TrainConfig {
  Strategy strategy = Strategy::kAttn;
  EncoderKind encoder = EncoderKind::kIdentity;
  std::size_t in_dim = 16;  // M_in
  std::size_t dim = 16;     // M
  std::size_t hidden = 64;  // K, attention width
  std::size_t classes = 2;  // C
  double learning_rate = 0.05;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool freeze_encoder = true;
  bool freeze_pooling = false;
  bool freeze_head = false;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t max_images = 6;     // concat-embed cap
  std::size_t concat_hidden = 32; // concat-embed bottleneck width
  /// Instance layout used by concat-grid when bags carry no shape;
  /// defaults to (M_in, 1).
  std::optional<Shape2D> instance_shape;

  void validate() const;
};

struct Model {
  Strategy strategy = Strategy::kAttn;
  EncoderParams encoder;
  PoolingParams pooling;
  ConcatProjParams concat;
  HeadParams head;
  bool pooling_frozen = false;
  std::optional<Shape2D> instance_shape;

  bool operator==(const Model&) const = default;
};

/// A named view onto one parameter array of a model.
struct ParamSlot {
  std::string name;
  std::vector<std::size_t> dims;
  std::span<double> values;
  bool trainable = false;
};

std::vector<ParamSlot> parameter_slots(Model& model);

struct NamedArray {
  std::string name;
  std::vector<double> values;
};

/// Gradients for the trainable slots, in parameter_slots order.
struct ModelGradients {
  std::vector<NamedArray> arrays;

  const NamedArray* find(std::string_view name) const;
};

/// Draws encoder, pooling, projection and head parameters in that order.
Model init_model(const TrainConfig& config, Rng& rng);

struct ForwardResult {
  Vector logits;
  PooledOutput pooled;
};

ForwardResult forward(const Model& model, const Bag& bag);
std::size_t predict(const Model& model, const Bag& bag);

/// -log softmax(logits)[label], computed stably.
double cross_entropy(std::span<const double> logits, std::size_t label);

struct LossAndGrads {
  double loss = 0.0;
  ModelGradients grads;
};

/// Mean cross-entropy over the batch and its gradients for unfrozen
/// parameters. Throws DataError on an unlabeled bag.
LossAndGrads loss_and_grads(const Model& model, std::span<const Bag> batch);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean batch loss during the epoch
  double accuracy = 0.0;  // training accuracy after the epoch
};

struct TrainResult {
  Model model;
  Model initial;
  std::vector<EpochStats> history;
};

/// Deterministic in (config, data): the same inputs give bit-identical
/// parameters and history.
TrainResult train(const TrainConfig& config, std::span<const Bag> train_set);

struct ParamReport {
  std::size_t encoder = 0;
  std::size_t pooling = 0;
  std::size_t concat_projection = 0;
  std::size_t head = 0;
  std::size_t baseline_total = 0;
  std::size_t total = 0;
  std::size_t extra_over_baseline = 0;
};

ParamReport count_params(const TrainConfig& config);

}  // namespace mivc
