// SPDX-License-Identifier: Apache-2.0
//
// JSON run configuration shared by the CLI commands:
//
//   {
//     "seed": 1,
//     "out": "runs/bench",
//     "data": {"train_manifest": "...", "eval_manifest": "..."},
//     "synthetic": { SyntheticSpec fields },
//     "train": { TrainConfig fields },
//     "strategies": ["single", "concat-grid", ...]
//   }
//
// Every section is optional; unknown keys at any level are rejected. The
// single top-level seed drives both data generation and training.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mivc/data.hpp"
#include "mivc/model.hpp"

namespace mivc {

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out;
  std::string train_manifest;
  std::string eval_manifest;
  SyntheticSpec synthetic;
  TrainConfig train;
  /// Dimensions left unset are filled in from the dataset.
  std::optional<std::size_t> in_dim;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> classes;
  std::vector<Strategy> strategies;

  /// Pushes the shared seed into the synthetic and training sections.
  void sync_seed();
};

/// Defaults: the bundled witness-style synthetic benchmark.
RunConfig default_run_config();

/// Applies a JSON document on top of `base`. Throws UsageError on unknown
/// keys or ill-typed values.
RunConfig parse_run_config(std::string_view json_text, RunConfig base = default_run_config());

/// Fully resolved configuration, suitable for a reproducibility snapshot.
std::string run_config_json(const RunConfig& config);

/// Fills unset dimensions from loaded bags and checks explicit ones.
void resolve_dims(RunConfig& config, const std::vector<Bag>& bags, std::size_t classes);

}  // namespace mivc
