// SPDX-License-Identifier: Apache-2.0
//
// Multiple-instance pooling: fuses a bag of N same-dimension instance
// embeddings into one embedding E. Average and max pooling are parameter
// free; attention and gated attention learn a scoring network
//
//   s_n = w . tanh(Z e_n)                         (attn)
//   s_n = w . (tanh(Z e_n) * sigm(G e_n))         (gated)
//   alpha = softmax(s),  E = sum_n alpha_n e_n
//
// with w in R^K and Z, G in R^{K x M}. All pooling kinds are invariant to
// the order of the instances.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mivc/numkern.hpp"

namespace mivc {

/// Row-major (patches x dims) layout of a 2-D instance representation.
struct Shape2D {
  std::size_t patches = 0;
  std::size_t dims = 0;

  std::size_t size() const noexcept { return patches * dims; }
  bool operator==(const Shape2D&) const = default;
};

struct InstanceEmbedding {
  Vector values;
  std::optional<Shape2D> shape;

  std::size_t dim() const noexcept { return values.size(); }
};

struct Bag {
  std::string id;
  std::vector<InstanceEmbedding> instances;
  std::optional<int> label;
  std::map<std::string, std::string> meta;

  /// Builds an unshaped bag from raw rows.
  static Bag from_rows(std::vector<std::vector<double>> rows, std::string id = {},
                       std::optional<int> label = std::nullopt);

  std::size_t size() const noexcept { return instances.size(); }
  /// Instance dimension M; 0 for an empty bag.
  std::size_t dim() const noexcept { return instances.empty() ? 0 : instances.front().dim(); }
  const Vector& operator[](std::size_t n) const { return instances[n].values; }

  /// Throws UsageError for an empty bag, ShapeError for inconsistent instances.
  void validate() const;
};

/// Reorders a bag's instances: result[i] = bag[order[i]].
Bag permuted(const Bag& bag, const std::vector<std::size_t>& order);

enum class PoolingKind { kAvg, kMax, kAttn, kGated };

std::string_view to_string(PoolingKind kind);
PoolingKind parse_pooling_kind(std::string_view name);
bool is_attention(PoolingKind kind) noexcept;

/// Learnable state of a pooling operator. Parameter-free kinds leave
/// w, Z, and G empty; gated is the only kind carrying G.
struct PoolingParams {
  PoolingKind kind = PoolingKind::kAvg;
  std::size_t hidden = 0;  // K
  std::size_t dim = 0;     // M
  Vector w;
  Matrix Z;
  Matrix G;

  static PoolingParams parameter_free(PoolingKind kind);
  /// Uniform in [-1/sqrt(K), 1/sqrt(K)], drawn in the order w, Z, G.
  static PoolingParams random(PoolingKind kind, std::size_t hidden, std::size_t dim, Rng& rng);
  static PoolingParams zeros(PoolingKind kind, std::size_t hidden, std::size_t dim);

  void validate() const;
  std::size_t parameter_count() const noexcept;

  bool operator==(const PoolingParams&) const = default;
};

struct PooledOutput {
  Vector E;
  std::optional<Vector> alpha;
  std::optional<std::vector<std::size_t>> argmax_index;
};

struct PoolGradients {
  std::optional<Vector> d_w;
  std::optional<Matrix> d_Z;
  std::optional<Matrix> d_G;
  std::vector<Vector> d_instances;
};

PooledOutput pool_avg(const Bag& bag);
/// Per-feature maximum across instances; ties go to the smallest index.
PooledOutput pool_max(const Bag& bag);
Vector attention_scores(const PoolingParams& params, const Bag& bag);
PooledOutput pool_attention(const PoolingParams& params, const Bag& bag);
/// Dispatches on params.kind.
PooledOutput pool(const PoolingParams& params, const Bag& bag);

/// Exact gradients given dLoss/dE. For max pooling the argmax is held fixed.
PoolGradients pool_backward(const PoolingParams& params, const Bag& bag,
                            std::span<const double> upstream_dE);

InstanceEmbedding flatten(const InstanceEmbedding& inst);
InstanceEmbedding unflatten(const InstanceEmbedding& inst, Shape2D shape);

/// Pools a bag of 2-D representations in flattened form and restores the
/// shared (P, D) shape on the result.
InstanceEmbedding pool_shaped(const PoolingParams& params, const Bag& bag,
                              PooledOutput* details = nullptr);

}  // namespace mivc
