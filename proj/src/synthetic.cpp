// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <iomanip>
#include <sstream>

#include "mivc/data.hpp"

namespace mivc {

void SyntheticSpec::validate() const {
  if (n_bags == 0) throw UsageError("synthetic: n_bags must be positive");
  if (n_min < 1 || n_max < n_min) throw UsageError("synthetic: need 1 <= n_min <= n_max");
  if (dim == 0) throw UsageError("synthetic: dim must be positive");
  if (!(witness_rate > 0.0 && witness_rate <= 1.0)) {
    throw UsageError("synthetic: witness_rate must lie in (0, 1]");
  }
  if (!(noise_sigma > 0.0)) throw UsageError("synthetic: noise_sigma must be positive");
  if (!(distractor_sigma >= 0.0)) throw UsageError("synthetic: distractor_sigma must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("synthetic: train_fraction must lie in (0, 1)");
  }
  if (class_centers.empty()) {
    if (classes < 2) throw UsageError("synthetic: need at least 2 classes");
    if (!(center_radius > 0.0)) throw UsageError("synthetic: center_radius must be positive");
  } else {
    if (class_centers.size() < 2) throw UsageError("synthetic: need at least 2 class centers");
    for (const auto& c : class_centers) {
      if (c.size() != dim) throw UsageError("synthetic: class center length differs from dim");
    }
  }
  if (shape && shape->size() != dim) throw UsageError("synthetic: shape does not match dim");
}

namespace {

std::string bag_name(std::size_t index, std::size_t total) {
  std::ostringstream os;
  const int width = static_cast<int>(std::to_string(total > 0 ? total - 1 : 0).size());
  os << "bag" << std::setw(width) << std::setfill('0') << index;
  return os.str();
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticDataset out;

  out.class_centers = spec.class_centers;
  if (out.class_centers.empty()) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      std::vector<double> center(spec.dim);
      double norm = 0.0;
      for (double& x : center) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (double& x : center) x *= spec.center_radius / norm;
      out.class_centers.push_back(std::move(center));
    }
  }
  const std::size_t classes = out.class_centers.size();

  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = a + 1; b < classes; ++b) {
      double d2 = 0.0;
      for (std::size_t m = 0; m < spec.dim; ++m) {
        const double d = out.class_centers[a][m] - out.class_centers[b][m];
        d2 += d * d;
      }
      if (std::sqrt(d2) < spec.noise_sigma) {
        out.warnings.push_back("class centers " + std::to_string(a) + " and " +
                               std::to_string(b) + " are closer than noise_sigma");
      }
    }
  }

  // Balanced labels in shuffled order.
  std::vector<int> labels(spec.n_bags);
  for (std::size_t i = 0; i < spec.n_bags; ++i) labels[i] = static_cast<int>(i % classes);
  rng.shuffle(labels);

  const std::size_t n_train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(spec.n_bags)));

  for (std::size_t i = 0; i < spec.n_bags; ++i) {
    const int label = labels[i];
    const auto& center = out.class_centers[static_cast<std::size_t>(label)];
    const auto n = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.n_min),
                                                        static_cast<std::int64_t>(spec.n_max)));
    std::vector<bool> is_witness(n);
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      is_witness[k] = rng.uniform() < spec.witness_rate;
      any = any || is_witness[k];
    }
    if (!any) is_witness[static_cast<std::size_t>(rng.below(n))] = true;

    Bag bag;
    bag.id = bag_name(i, spec.n_bags);
    bag.label = label;
    std::string witness_list;
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<double> v(spec.dim);
      if (is_witness[k]) {
        for (std::size_t m = 0; m < spec.dim; ++m) v[m] = rng.normal(center[m], spec.noise_sigma);
        if (!witness_list.empty()) witness_list += ',';
        witness_list += std::to_string(k);
      } else {
        for (double& x : v) x = rng.normal(0.0, spec.distractor_sigma);
      }
      // Stored precision is f32; keep the in-memory bag identical to its file.
      for (double& x : v) x = static_cast<double>(static_cast<float>(x));
      bag.instances.push_back({Vector(std::move(v)), spec.shape});
    }
    bag.meta["witnesses"] = witness_list;
    (i < n_train ? out.train : out.eval).push_back(std::move(bag));
  }
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data) {
  auto emit = [&](const std::vector<Bag>& bags, const char* manifest_name) {
    DatasetManifest manifest;
    std::size_t classes = data.class_centers.size();
    for (std::size_t c = 0; c < classes; ++c) manifest.class_names.push_back("class" + std::to_string(c));
    for (const auto& bag : bags) {
      const std::string rel = "bags/" + bag.id + ".mivc";
      write_bag(dir / rel, bag);
      manifest.records.push_back({bag.id, *bag.label, rel, bag.size(),
                                  bag.instances.front().shape, witnesses_of(bag)});
    }
    write_manifest(dir / manifest_name, manifest);
  };
  emit(data.train, "train.jsonl");
  emit(data.eval, "eval.jsonl");
}

}  // namespace mivc
