// SPDX-License-Identifier: Apache-2.0
//
// Non-pooling alternatives for multi-instance input: keep only the first
// instance, tile all instances into a square grid, or concatenate a capped
// number of embeddings and project them back down.

#pragma once

#include <cstddef>

#include "mivc/pooling.hpp"

namespace mivc {

/// E = e_1, alpha = [1, 0, ..., 0]. Order sensitive.
PooledOutput single_first(const Bag& bag);

struct GridSpec {
  std::size_t side = 0;
  std::size_t filled = 0;
  double blank_value = 0.0;

  std::size_t blanks() const noexcept { return side * side - filled; }
};

/// side = ceil(sqrt(n)).
GridSpec grid_spec_for(std::size_t n, double blank_value = 0.0);

/// Tiles the bag's (P, D) instances row-major into a side x side grid of
/// blocks, giving one (side*P, side*D) instance. Unused cells hold
/// blank_value.
InstanceEmbedding grid_concat(const Bag& bag, double blank_value = 0.0);

/// Box-downsamples a (side*P, side*D) grid back to (P, D), the way a fixed
/// resolution encoder sees a tiled image.
InstanceEmbedding grid_resize(const InstanceEmbedding& grid, std::size_t side);

/// Adjoint of grid_resize then grid_concat: maps d(resized) back onto the
/// bag's instances (blank cells absorb nothing).
std::vector<Vector> grid_backward(const Bag& bag, std::span<const double> d_resized);

struct ConcatProjParams {
  std::size_t max_images = 6;
  std::size_t hidden_dim = 0;
  std::size_t dim = 0;  // M
  Matrix W1;            // hidden_dim x (max_images * M)
  Matrix W2;            // M x hidden_dim

  static ConcatProjParams zeros(std::size_t max_images, std::size_t hidden_dim, std::size_t dim);
  /// Uniform in +-1/sqrt(fan_in) per layer, W1 then W2.
  static ConcatProjParams random(std::size_t max_images, std::size_t hidden_dim, std::size_t dim,
                                 Rng& rng);

  void validate() const;
  std::size_t parameter_count() const noexcept { return W1.size() + W2.size(); }

  bool operator==(const ConcatProjParams&) const = default;
};

/// The first max_images instances, zero padded, as one vector.
Vector concat_capped(const Bag& bag, std::size_t max_images);

/// out = W2 relu(W1 concat(e_1 .. e_max_images)).
Vector concat_project(const ConcatProjParams& params, const Bag& bag);

struct ConcatProjGradients {
  Matrix d_W1;
  Matrix d_W2;
  std::vector<Vector> d_instances;  // zero beyond max_images
};

ConcatProjGradients concat_project_backward(const ConcatProjParams& params, const Bag& bag,
                                            std::span<const double> upstream);

}  // namespace mivc
