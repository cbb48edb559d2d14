// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "mivc/baselines.hpp"
#include "test_support.hpp"

namespace mivc {
namespace {

Bag shaped_bag(Rng& rng, std::size_t n, Shape2D shape) {
  Bag bag;
  for (std::size_t i = 0; i < n; ++i) {
    Vector e(shape.size());
    for (double& x : e) x = rng.uniform(1.0, 2.0);
    bag.instances.push_back({e, shape});
  }
  return bag;
}

TEST(SingleFirst, Examples) {
  auto out = single_first(Bag::from_rows({{1, 2}, {9, 9}}));
  EXPECT_EQ(out.E, (Vector{1, 2}));
  EXPECT_EQ(*out.alpha, (Vector{1, 0}));
  EXPECT_EQ(single_first(Bag::from_rows({{5}})).E, (Vector{5}));
  EXPECT_THROW(single_first(Bag{}), UsageError);
}

TEST(SingleFirst, IsOrderSensitive) {
  const Bag bag = Bag::from_rows({{1, 2}, {9, 9}, {4, 0}});
  EXPECT_NE(single_first(bag).E, single_first(permuted(bag, {1, 0, 2})).E);
}

TEST(GridConcat, SideRule) {
  for (std::size_t n = 1; n <= 21; ++n) {
    const GridSpec g = grid_spec_for(n);
    EXPECT_GE(g.side * g.side, n);
    EXPECT_LT((g.side - 1) * (g.side - 1), n);
    EXPECT_EQ(g.blanks(), g.side * g.side - n);
  }
  EXPECT_EQ(grid_spec_for(4).blanks(), 0u);
  EXPECT_EQ(grid_spec_for(5).blanks(), 4u);
}

TEST(GridConcat, FourInstancesMakeTwoByTwo) {
  Rng rng(1);
  const Bag bag = shaped_bag(rng, 4, {2, 2});
  const auto grid = grid_concat(bag);
  ASSERT_EQ(grid.shape, (Shape2D{4, 4}));
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t gr = (n / 2) * 2 + r, gc = (n % 2) * 2 + c;
        EXPECT_EQ(grid.values[gr * 4 + gc], bag[n][r * 2 + c]);
      }
    }
  }
}

TEST(GridConcat, FiveInstancesLeaveFourBlankBlocks) {
  Rng rng(2);
  const Bag bag = shaped_bag(rng, 5, {2, 2});
  const auto grid = grid_concat(bag);
  ASSERT_EQ(grid.shape, (Shape2D{6, 6}));
  std::size_t zero_blocks = 0;
  for (std::size_t cell = 0; cell < 9; ++cell) {
    bool all_zero = true;
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 2; ++c) {
        all_zero = all_zero && grid.values[((cell / 3) * 2 + r) * 6 + (cell % 3) * 2 + c] == 0.0;
      }
    }
    zero_blocks += all_zero;
    EXPECT_EQ(all_zero, cell >= 5) << "cell " << cell;
  }
  EXPECT_EQ(zero_blocks, 4u);
}

TEST(GridConcat, SingletonUnchanged) {
  Rng rng(3);
  const Bag bag = shaped_bag(rng, 1, {3, 2});
  const auto grid = grid_concat(bag);
  EXPECT_EQ(grid.values, bag[0]);
  EXPECT_EQ(grid.shape, (Shape2D{3, 2}));
}

TEST(GridConcat, UnshapedInstancesRejected) {
  EXPECT_THROW(grid_concat(Bag::from_rows({{1, 2}})), UsageError);
}

TEST(GridResize, BackwardIsAdjoint) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape2D shape{1 + rng.below(3), 1 + rng.below(3)};
    const Bag bag = shaped_bag(rng, 1 + rng.below(10), shape);
    const GridSpec spec = grid_spec_for(bag.size());
    const auto resized = grid_resize(grid_concat(bag), spec.side);
    ASSERT_EQ(resized.shape, shape);
    Vector g(shape.size());
    for (double& x : g) x = rng.normal();
    const auto back = grid_backward(bag, g);
    // <g, R(x)> == <R^T g, x> for the linear map x -> R(x).
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) lhs += g[i] * resized.values[i];
    for (std::size_t n = 0; n < bag.size(); ++n) rhs += dot(back[n], bag[n]);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(ConcatProject, ZeroParamsGiveZeros) {
  const auto p = ConcatProjParams::zeros(6, 4, 3);
  EXPECT_EQ(concat_project(p, Bag::from_rows({{1, 2, 3}, {4, 5, 6}})), Vector(3, 0.0));
}

TEST(ConcatProject, SelectorMatricesReproduceFirstInstance) {
  // W1 = [I; -I] and W2 = [I, -I] give relu(x) - relu(-x) = x.
  ConcatProjParams p = ConcatProjParams::zeros(1, 4, 2);
  p.W1 = Matrix{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  p.W2 = Matrix{{1, 0, -1, 0}, {0, 1, 0, -1}};
  EXPECT_EQ(concat_project(p, Bag::from_rows({{0.5, -3}})), (Vector{0.5, -3}));

  ConcatProjParams small = ConcatProjParams::zeros(1, 2, 2);
  small.W1 = Matrix{{1, 0}, {0, 1}};
  small.W2 = Matrix{{1, 0}, {0, 1}};
  EXPECT_EQ(concat_project(small, Bag::from_rows({{2, 7}})), (Vector{2, 7}));
}

TEST(ConcatProject, InstancesPastCapIgnored) {
  Rng rng(5);
  const auto p = ConcatProjParams::random(6, 8, 3, rng);
  Bag bag = test::random_bag(rng, 8, 3);
  const Vector before = concat_project(p, bag);
  bag.instances[6].values = Vector{100, -100, 5};
  bag.instances[7].values = Vector{-7, 7, 42};
  EXPECT_EQ(concat_project(p, bag), before);
}

TEST(ConcatProject, ShortBagsZeroPadded) {
  const Vector x = concat_capped(Bag::from_rows({{1, 2}, {3, 4}}), 3);
  EXPECT_EQ(x, (Vector{1, 2, 3, 4, 0, 0}));
}

TEST(ConcatProject, IsOrderSensitive) {
  Rng rng(6);
  const auto p = ConcatProjParams::random(6, 8, 3, rng);
  const Bag bag = test::random_bag(rng, 4, 3);
  EXPECT_NE(concat_project(p, bag), concat_project(p, permuted(bag, {3, 2, 1, 0})));
}

TEST(ConcatProject, ShapeMismatch) {
  Rng rng(7);
  const auto p = ConcatProjParams::random(6, 8, 3, rng);
  EXPECT_THROW(concat_project(p, Bag::from_rows({{1, 2}})), ShapeError);
}

TEST(ConcatProject, BackwardMatchesDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + rng.below(4), cap = 1 + rng.below(4);
    auto p = ConcatProjParams::random(cap, 1 + rng.below(6), m, rng);
    Bag bag = test::random_bag(rng, 1 + rng.below(6), m);
    Vector u(m);
    for (double& x : u) x = rng.normal();
    const auto g = concat_project_backward(p, bag, u);
    auto loss = [&] { return dot(u, concat_project(p, bag)); };
    for (std::size_t i = 0; i < p.W1.size(); ++i) {
      const double num = test::central_difference(p.W1.span()[i], 1e-6, loss);
      EXPECT_NEAR(g.d_W1.span()[i], num, 1e-7);
    }
    for (std::size_t i = 0; i < p.W2.size(); ++i) {
      const double num = test::central_difference(p.W2.span()[i], 1e-6, loss);
      EXPECT_NEAR(g.d_W2.span()[i], num, 1e-7);
    }
    for (std::size_t n = 0; n < bag.size(); ++n) {
      for (std::size_t j = 0; j < m; ++j) {
        const double num = test::central_difference(bag.instances[n].values[j], 1e-6, loss);
        EXPECT_NEAR(g.d_instances[n][j], num, 1e-7);
      }
    }
  }
}

}  // namespace
}  // namespace mivc
