// SPDX-License-Identifier: Apache-2.0
//
// Bag storage and dataset manifests.
//
// Bag embedding file (".mivc"), little endian, u32 integers:
//
//   "MIVC" | version=1 | N | rank (1 or 2) | rank x dim | N*M f32 row-major
//
// rank 1 stores dims = [M]; rank 2 stores dims = [P, D] with M = P*D.
// Example: two instances [1, 2] and [3, 4] encode as
//
//   4d495643 01000000 02000000 01000000 02000000
//   0000803f 00000040 00004040 00008040
//
// Manifest: JSON lines. An optional first line {"class_names": [...]};
// every other line is one bag record:
//
//   {"bag_id": "b0", "label": 1, "path": "bags/b0.mivc", "n_instances": 3,
//    "shape": [4, 4], "witnesses": [2]}
//
// "shape" and "witnesses" are optional; relative paths resolve against the
// manifest's directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mivc/pooling.hpp"

namespace mivc {

inline constexpr char kBagMagic[4] = {'M', 'I', 'V', 'C'};
inline constexpr std::uint32_t kBagVersion = 1;

/// Values are narrowed to f32 on encode.
std::string encode_bag(const Bag& bag);
/// Decoded values are widened to f64. Id and label stay empty.
Bag decode_bag(std::string_view bytes, const std::string& context = "bag");

void write_bag(const std::filesystem::path& path, const Bag& bag);
Bag read_bag_file(const std::filesystem::path& path);

struct ManifestRecord {
  std::string bag_id;
  int label = 0;
  std::string path;
  std::size_t n_instances = 0;
  std::optional<Shape2D> shape;
  std::vector<std::size_t> witnesses;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestRecord> records;
  /// Directory relative record paths resolve against.
  std::filesystem::path base_dir;

  /// Number of classes: class_names.size(), or 1 + max label without names.
  std::size_t classes() const;
  /// Throws LoadError(kValidation) naming the offending record.
  void validate() const;
};

DatasetManifest parse_manifest(std::string_view text, const std::string& context = "manifest");
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string encode_manifest(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads and cross-checks one bag against its record. Witness indices are
/// copied to meta["witnesses"] as a comma-separated list.
Bag load_bag(const ManifestRecord& record, const std::filesystem::path& base_dir);
std::vector<Bag> load_dataset(const DatasetManifest& manifest);

/// Instance indices listed in meta["witnesses"].
std::vector<std::size_t> witnesses_of(const Bag& bag);

/// One instance per row. Blank trailing lines are ignored.
Bag parse_csv(std::string_view text, char delimiter = ',', const std::string& context = "csv");
Bag import_csv(const std::filesystem::path& path, char delimiter = ',');

struct SyntheticSpec {
  std::size_t n_bags = 2000;
  std::size_t n_min = 2;
  std::size_t n_max = 21;
  std::size_t dim = 16;
  double witness_rate = 0.1;
  /// One center per class. When empty, `classes` centers are drawn from the
  /// seed with norm `center_radius`.
  std::vector<std::vector<double>> class_centers;
  std::size_t classes = 4;
  double center_radius = 3.0;
  /// Spread of witness instances around their class center.
  double noise_sigma = 0.5;
  /// Background instances are N(0, distractor_sigma^2 I).
  double distractor_sigma = 1.0;
  std::uint64_t seed = 1;
  std::optional<Shape2D> shape;
  double train_fraction = 0.8;

  void validate() const;
};

struct SyntheticDataset {
  std::vector<std::vector<double>> class_centers;
  std::vector<Bag> train;
  std::vector<Bag> eval;
  std::vector<std::string> warnings;
};

/// Pure function of the spec. Every bag holds at least one witness drawn
/// near its class center; all other instances are background.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes bags/<id>.mivc plus train.jsonl and eval.jsonl under `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data);

}  // namespace mivc
