// SPDX-License-Identifier: Apache-2.0

#include "mivc/baselines.hpp"

#include <cmath>

namespace mivc {

PooledOutput single_first(const Bag& bag) {
  bag.validate();
  Vector alpha(bag.size(), 0.0);
  alpha[0] = 1.0;
  return {bag[0], std::move(alpha), std::nullopt};
}

GridSpec grid_spec_for(std::size_t n, double blank_value) {
  if (n == 0) throw UsageError("grid needs at least one instance");
  std::size_t side = 1;
  while (side * side < n) ++side;
  return {side, n, blank_value};
}

namespace {

Shape2D require_shape(const Bag& bag) {
  bag.validate();
  const auto& shape = bag.instances.front().shape;
  if (!shape) throw UsageError("grid concatenation needs shaped instances, bag '" + bag.id + "'");
  return *shape;
}

}  // namespace

InstanceEmbedding grid_concat(const Bag& bag, double blank_value) {
  const Shape2D cell = require_shape(bag);
  const GridSpec grid = grid_spec_for(bag.size(), blank_value);
  const Shape2D out_shape{grid.side * cell.patches, grid.side * cell.dims};
  Vector out(out_shape.size(), blank_value);
  for (std::size_t n = 0; n < bag.size(); ++n) {
    const std::size_t r0 = (n / grid.side) * cell.patches;
    const std::size_t c0 = (n % grid.side) * cell.dims;
    const auto& e = bag[n];
    for (std::size_t p = 0; p < cell.patches; ++p) {
      for (std::size_t d = 0; d < cell.dims; ++d) {
        out[(r0 + p) * out_shape.dims + c0 + d] = e[p * cell.dims + d];
      }
    }
  }
  return {std::move(out), out_shape};
}

InstanceEmbedding grid_resize(const InstanceEmbedding& grid, std::size_t side) {
  if (!grid.shape) throw UsageError("grid_resize needs a shaped grid");
  const Shape2D in = *grid.shape;
  if (side == 0 || in.patches % side != 0 || in.dims % side != 0) {
    throw ShapeError("grid of (" + std::to_string(in.patches) + "," + std::to_string(in.dims) +
                     ") is not divisible by side " + std::to_string(side));
  }
  const Shape2D out_shape{in.patches / side, in.dims / side};
  const double scale = 1.0 / static_cast<double>(side * side);
  Vector out(out_shape.size());
  for (std::size_t i = 0; i < out_shape.patches; ++i) {
    for (std::size_t j = 0; j < out_shape.dims; ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < side; ++a) {
        for (std::size_t b = 0; b < side; ++b) {
          acc += grid.values[(i * side + a) * in.dims + j * side + b];
        }
      }
      out[i * out_shape.dims + j] = acc * scale;
    }
  }
  return {std::move(out), out_shape};
}

std::vector<Vector> grid_backward(const Bag& bag, std::span<const double> d_resized) {
  const Shape2D cell = require_shape(bag);
  if (d_resized.size() != cell.size()) {
    throw ShapeError("grid_backward: gradient length " + std::to_string(d_resized.size()) +
                     " vs cell size " + std::to_string(cell.size()));
  }
  const GridSpec grid = grid_spec_for(bag.size());
  const double scale = 1.0 / static_cast<double>(grid.side * grid.side);
  std::vector<Vector> out(bag.size(), Vector(cell.size()));
  for (std::size_t n = 0; n < bag.size(); ++n) {
    const std::size_t r0 = (n / grid.side) * cell.patches;
    const std::size_t c0 = (n % grid.side) * cell.dims;
    for (std::size_t p = 0; p < cell.patches; ++p) {
      for (std::size_t d = 0; d < cell.dims; ++d) {
        const std::size_t gr = r0 + p;
        const std::size_t gc = c0 + d;
        out[n][p * cell.dims + d] =
            scale * d_resized[(gr / grid.side) * cell.dims + gc / grid.side];
      }
    }
  }
  return out;
}

ConcatProjParams ConcatProjParams::zeros(std::size_t max_images, std::size_t hidden_dim,
                                         std::size_t dim) {
  ConcatProjParams p;
  p.max_images = max_images;
  p.hidden_dim = hidden_dim;
  p.dim = dim;
  p.W1 = Matrix(hidden_dim, max_images * dim);
  p.W2 = Matrix(dim, hidden_dim);
  return p;
}

ConcatProjParams ConcatProjParams::random(std::size_t max_images, std::size_t hidden_dim,
                                          std::size_t dim, Rng& rng) {
  ConcatProjParams p = zeros(max_images, hidden_dim, dim);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(p.W1.cols()));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(p.W2.cols()));
  for (double& x : p.W1.span()) x = rng.uniform(-b1, b1);
  for (double& x : p.W2.span()) x = rng.uniform(-b2, b2);
  return p;
}

void ConcatProjParams::validate() const {
  if (max_images == 0 || hidden_dim == 0 || dim == 0) {
    throw ShapeError("concat projection needs positive max_images, hidden_dim and M");
  }
  if (W1.rows() != hidden_dim || W1.cols() != max_images * dim) {
    throw ShapeError("W1 is " + shape_string(W1) + ", expected (" + std::to_string(hidden_dim) +
                     "x" + std::to_string(max_images * dim) + ")");
  }
  if (W2.rows() != dim || W2.cols() != hidden_dim) {
    throw ShapeError("W2 is " + shape_string(W2) + ", expected (" + std::to_string(dim) + "x" +
                     std::to_string(hidden_dim) + ")");
  }
}

Vector concat_capped(const Bag& bag, std::size_t max_images) {
  bag.validate();
  const std::size_t m = bag.dim();
  Vector x(max_images * m);
  const std::size_t used = std::min(max_images, bag.size());
  for (std::size_t n = 0; n < used; ++n) {
    std::copy(bag[n].begin(), bag[n].end(), x.begin() + static_cast<std::ptrdiff_t>(n * m));
  }
  return x;
}

namespace {

void require_dim(const ConcatProjParams& params, const Bag& bag) {
  params.validate();
  bag.validate();
  if (bag.dim() != params.dim) {
    throw ShapeError("bag '" + bag.id + "' has M=" + std::to_string(bag.dim()) +
                     " but concat projection expects M=" + std::to_string(params.dim));
  }
}

}  // namespace

Vector concat_project(const ConcatProjParams& params, const Bag& bag) {
  require_dim(params, bag);
  const Vector x = concat_capped(bag, params.max_images);
  return matvec(params.W2, relu_vec(matvec(params.W1, x)));
}

ConcatProjGradients concat_project_backward(const ConcatProjParams& params, const Bag& bag,
                                            std::span<const double> upstream) {
  require_dim(params, bag);
  if (upstream.size() != params.dim) {
    throw ShapeError("concat projection upstream gradient has length " +
                     std::to_string(upstream.size()));
  }
  const Vector x = concat_capped(bag, params.max_images);
  const Vector pre = matvec(params.W1, x);
  const Vector hidden = relu_vec(pre);

  ConcatProjGradients g{Matrix(params.W1.rows(), params.W1.cols()),
                        Matrix(params.W2.rows(), params.W2.cols()),
                        std::vector<Vector>(bag.size(), Vector(params.dim))};
  add_outer(1.0, upstream, hidden, g.d_W2);
  Vector d_pre = matvec_transposed(params.W2, upstream);
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    if (pre[i] <= 0.0) d_pre[i] = 0.0;
  }
  add_outer(1.0, d_pre, x, g.d_W1);
  const Vector dx = matvec_transposed(params.W1, d_pre);
  const std::size_t used = std::min(params.max_images, bag.size());
  for (std::size_t n = 0; n < used; ++n) {
    for (std::size_t m = 0; m < params.dim; ++m) g.d_instances[n][m] = dx[n * params.dim + m];
  }
  return g;
}

}  // namespace mivc
