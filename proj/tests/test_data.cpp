// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "mivc/data.hpp"
#include "mivc/io_util.hpp"
#include "golden_fixtures.hpp"
#include "test_support.hpp"

namespace mivc {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_text(const fs::path& p) { return io::read_file(p); }

LoadErrorKind load_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const LoadError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no LoadError thrown";
  return LoadErrorKind::kValidation;
}

TEST(BagFormat, GoldenBytes) {
  const Bag bag = Bag::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(io::to_hex(encode_bag(bag)), golden::kTwoByTwoBagHex);
}

TEST(BagFormat, ShapedGoldenBytes) {
  Bag bag;
  bag.instances.push_back({Vector{0.5, -1.25, 3.0, 0.1}, Shape2D{2, 2}});
  const std::string bytes = encode_bag(bag);
  EXPECT_EQ(io::to_hex(bytes), golden::kShapedBagHex);
  const Bag back = decode_bag(bytes);
  EXPECT_EQ(back.instances[0].shape, (Shape2D{2, 2}));
  EXPECT_EQ(back[0][3], static_cast<double>(0.1f));
}

TEST(BagFormat, RoundTripIsExactAtFloatPrecision) {
  Rng rng(1);
  const auto dir = test::temp_dir("bag_roundtrip");
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(20);
    Bag bag = test::random_bag(rng, 1 + rng.below(10), m, 100.0);
    for (auto& inst : bag.instances) {
      for (double& x : inst.values) x = static_cast<double>(static_cast<float>(x));
    }
    const auto path = dir / ("b" + std::to_string(trial) + ".mivc");
    write_bag(path, bag);
    const Bag back = read_bag_file(path);
    ASSERT_EQ(back.size(), bag.size());
    for (std::size_t n = 0; n < bag.size(); ++n) EXPECT_EQ(back[n], bag[n]);
    EXPECT_EQ(encode_bag(back), encode_bag(bag));
  }
}

TEST(BagFormat, DistinctErrorKinds) {
  const std::string good = encode_bag(Bag::from_rows({{1, 2}, {3, 4}}));
  EXPECT_EQ(load_error([&] { decode_bag("XIVC" + good.substr(4)); }), LoadErrorKind::kBadMagic);
  std::string bad = good;
  bad[4] = 9;
  EXPECT_EQ(load_error([&] { decode_bag(bad); }), LoadErrorKind::kBadVersion);
  EXPECT_EQ(load_error([&] { decode_bag(good.substr(0, good.size() - 4)); }),
            LoadErrorKind::kCountMismatch);
  EXPECT_EQ(load_error([&] { decode_bag(good + "abcd"); }), LoadErrorKind::kCountMismatch);
  bad = good;
  bad.replace(bad.size() - 4, 4, std::string("\0\0\xc0\x7f", 4));  // f32 NaN
  EXPECT_EQ(load_error([&] { decode_bag(bad); }), LoadErrorKind::kNonFinite);
  EXPECT_EQ(load_error([&] { read_bag_file(test::temp_dir("bag_missing") / "x.mivc"); }),
            LoadErrorKind::kMissingFile);
}

TEST(BagFormat, WriteRejectsNonFinite) {
  Bag bag = Bag::from_rows({{1, std::numeric_limits<double>::infinity()}});
  EXPECT_THROW(write_bag(test::temp_dir("bag_inf") / "x.mivc", bag), Error);
}

TEST(Manifest, ParseAndLoad) {
  const auto dir = test::temp_dir("manifest");
  write_bag(dir / "a.mivc", Bag::from_rows({{1, 2}, {3, 4}, {5, 6}}));
  write_text(dir / "m.jsonl",
             "{\"class_names\": [\"neg\", \"pos\"]}\n"
             "{\"bag_id\": \"a\", \"label\": 1, \"path\": \"a.mivc\", \"n_instances\": 3, "
             "\"witnesses\": [0, 2]}\n");
  const auto manifest = load_manifest(dir / "m.jsonl");
  EXPECT_EQ(manifest.classes(), 2u);
  const auto bags = load_dataset(manifest);
  ASSERT_EQ(bags.size(), 1u);
  EXPECT_EQ(bags[0].id, "a");
  EXPECT_EQ(bags[0].label, 1);
  EXPECT_EQ(witnesses_of(bags[0]), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(parse_manifest(encode_manifest(manifest)).records.size(), 1u);
}

TEST(Manifest, DuplicateIdNamed) {
  const std::string text =
      "{\"bag_id\": \"dup7\", \"label\": 0, \"path\": \"a\", \"n_instances\": 1}\n"
      "{\"bag_id\": \"dup7\", \"label\": 1, \"path\": \"b\", \"n_instances\": 1}\n";
  try {
    parse_manifest(text);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kValidation);
    EXPECT_NE(std::string(e.what()).find("dup7"), std::string::npos);
  }
}

TEST(Manifest, CountMismatch) {
  const auto dir = test::temp_dir("manifest_count");
  write_bag(dir / "a.mivc", Bag::from_rows({{1, 2}, {3, 4}}));
  ManifestRecord r{"a", 0, "a.mivc", 3, std::nullopt, {}};
  EXPECT_EQ(load_error([&] { load_bag(r, dir); }), LoadErrorKind::kCountMismatch);
}

TEST(Manifest, BadLinesRejected) {
  EXPECT_EQ(load_error([] { parse_manifest("{\"bag_id\": \"a\", \"label\": 0, \"path\": \"a\", "
                                           "\"n_instances\": 1, \"colour\": 3}\n"); }),
            LoadErrorKind::kParse);
  EXPECT_EQ(load_error([] { parse_manifest("not json\n"); }), LoadErrorKind::kParse);
  EXPECT_EQ(load_error([] { parse_manifest("{\"class_names\": [\"a\", \"b\"]}\n"
                                           "{\"bag_id\": \"a\", \"label\": 2, \"path\": \"a\", "
                                           "\"n_instances\": 1}\n"); }),
            LoadErrorKind::kValidation);
  EXPECT_EQ(load_error([] { load_manifest(test::temp_dir("no_manifest") / "m.jsonl"); }),
            LoadErrorKind::kMissingFile);
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.n_bags = 120;
  spec.n_max = 8;
  spec.dim = 6;
  spec.classes = 3;
  spec.seed = 9;
  return spec;
}

TEST(Synthetic, SameSeedSameFiles) {
  const auto a = test::temp_dir("synth_a"), b = test::temp_dir("synth_b");
  write_synthetic(a, generate_synthetic(small_spec()));
  write_synthetic(b, generate_synthetic(small_spec()));
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    EXPECT_EQ(read_text(entry.path()), read_text(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 120u + 2u);

  const auto manifest = load_manifest(a / "train.jsonl");
  EXPECT_EQ(manifest.records.size(), 96u);
  EXPECT_EQ(load_dataset(manifest).size(), 96u);
}

TEST(Synthetic, EveryBagHasAWitnessAndRespectsSizes) {
  const auto data = generate_synthetic(small_spec());
  EXPECT_EQ(data.train.size() + data.eval.size(), 120u);
  std::vector<std::size_t> per_class(3, 0);
  for (const auto* split : {&data.train, &data.eval}) {
    for (const Bag& bag : *split) {
      EXPECT_GE(bag.size(), 2u);
      EXPECT_LE(bag.size(), 8u);
      EXPECT_EQ(bag.dim(), 6u);
      EXPECT_FALSE(witnesses_of(bag).empty());
      ++per_class[static_cast<std::size_t>(*bag.label)];
    }
  }
  EXPECT_EQ(per_class, (std::vector<std::size_t>{40, 40, 40}));
}

TEST(Synthetic, FullWitnessRate) {
  SyntheticSpec spec = small_spec();
  spec.witness_rate = 1.0;
  for (const Bag& bag : generate_synthetic(spec).train) {
    EXPECT_EQ(witnesses_of(bag).size(), bag.size());
  }
}

TEST(Synthetic, NearestCenterOracleOnWitnesses) {
  SyntheticSpec spec = small_spec();
  spec.n_bags = 2000;
  spec.class_centers = {{8, 0, 0, 0, 0, 0}, {0, 8, 0, 0, 0, 0}, {0, 0, 8, 0, 0, 0}};
  spec.noise_sigma = 0.5;
  const auto data = generate_synthetic(spec);
  EXPECT_TRUE(data.warnings.empty());
  std::size_t correct = 0, total = 0;
  for (const auto* split : {&data.train, &data.eval}) {
    for (const Bag& bag : *split) {
      const std::size_t w = witnesses_of(bag).front();
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < data.class_centers.size(); ++c) {
        double d = 0.0;
        for (std::size_t j = 0; j < bag.dim(); ++j) {
          d += std::pow(bag[w][j] - data.class_centers[c][j], 2);
        }
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      correct += best == static_cast<std::size_t>(*bag.label);
      ++total;
    }
  }
  EXPECT_GT(double(correct) / double(total), 0.99);
}

TEST(Synthetic, CoincidentCentersWarnOnly) {
  SyntheticSpec spec = small_spec();
  spec.class_centers = {std::vector<double>(6, 1.0), std::vector<double>(6, 1.0),
                        std::vector<double>(6, 2.0)};
  const auto data = generate_synthetic(spec);
  EXPECT_FALSE(data.warnings.empty());
  EXPECT_EQ(data.train.size() + data.eval.size(), 120u);
}

TEST(Csv, Examples) {
  const Bag bag = parse_csv("1,2\n3,4");
  EXPECT_EQ(bag.size(), 2u);
  EXPECT_EQ(bag.dim(), 2u);
  EXPECT_EQ(bag[1], (Vector{3, 4}));
  EXPECT_EQ(parse_csv("1;2\r\n3;4\n", ';')[0], (Vector{1, 2}));
}

TEST(Csv, Errors) {
  const auto dir = test::temp_dir("csv");
  write_text(dir / "empty.csv", "");
  EXPECT_THROW(import_csv(dir / "empty.csv"), DataError);
  try {
    parse_csv("1,2\n3");
    FAIL() << "expected ragged row error";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind(), LoadErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  try {
    parse_csv("1,2\n3,x\n");
    FAIL() << "expected parse error";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(load_error([] { parse_csv("1,nan\n"); }), LoadErrorKind::kNonFinite);
}

}  // namespace
}  // namespace mivc
