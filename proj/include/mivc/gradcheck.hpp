// SPDX-License-Identifier: Apache-2.0
//
// Central-difference verification of pool_backward on random problems.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mivc/pooling.hpp"

namespace mivc {

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

struct GradCheckOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 7;
  double step = 1e-5;
  double tolerance = 1e-5;
  std::size_t max_hidden = 6;
  std::size_t max_dim = 8;
  std::size_t max_instances = 6;
  /// Negative control: perturbs one analytic entry per trial.
  bool inject_fault = false;
};

struct GradGroupResult {
  std::string group;  // "w", "Z", "G", "e"
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

struct GradCheckReport {
  PoolingKind kind = PoolingKind::kAttn;
  std::size_t trials = 0;
  std::vector<GradGroupResult> groups;
  bool passed = false;
};

/// Loss per trial is u . E for a random upstream u.
GradCheckReport check_pool_gradients(PoolingKind kind, const GradCheckOptions& options);

}  // namespace mivc
