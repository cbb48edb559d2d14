// SPDX-License-Identifier: Apache-2.0

#include "mivc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mivc/io_util.hpp"

namespace mivc {

using nlohmann::json;

std::string encode_bag(const Bag& bag) {
  bag.validate();
  const auto& shape = bag.instances.front().shape;
  io::ByteWriter w;
  w.bytes({kBagMagic, 4});
  w.u32(kBagVersion);
  w.u32(static_cast<std::uint32_t>(bag.size()));
  if (shape) {
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(shape->patches));
    w.u32(static_cast<std::uint32_t>(shape->dims));
  } else {
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(bag.dim()));
  }
  for (const auto& inst : bag.instances) {
    for (double v : inst.values) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw DataError("bag '" + bag.id + "': value " + std::to_string(v) +
                        " is not finite as f32");
      }
      w.f32(f);
    }
  }
  return w.take();
}

Bag decode_bag(std::string_view bytes, const std::string& context) {
  io::ByteReader r(bytes, context);
  if (r.remaining() < 4 || r.bytes(4) != std::string_view(kBagMagic, 4)) {
    throw LoadError(LoadErrorKind::kBadMagic, context + ": not an MIVC embedding file");
  }
  if (const auto version = r.u32(); version != kBagVersion) {
    throw LoadError(LoadErrorKind::kBadVersion,
                    context + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t n = r.u32();
  const std::uint32_t rank = r.u32();
  if (n == 0) throw LoadError(LoadErrorKind::kValidation, context + ": bag holds no instances");
  if (rank != 1 && rank != 2) {
    throw LoadError(LoadErrorKind::kShapeMismatch,
                    context + ": rank must be 1 or 2, got " + std::to_string(rank));
  }
  std::optional<Shape2D> shape;
  std::size_t m = r.u32();
  if (rank == 2) {
    shape = Shape2D{m, r.u32()};
    m = shape->size();
  }
  if (m == 0) throw LoadError(LoadErrorKind::kShapeMismatch, context + ": zero instance dimension");
  const std::size_t expected = static_cast<std::size_t>(n) * m * 4;
  if (r.remaining() < expected) {
    throw LoadError(LoadErrorKind::kCountMismatch,
                    context + ": header declares " + std::to_string(n) + " instances of M=" +
                        std::to_string(m) + " but payload holds " +
                        std::to_string(r.remaining() / 4) + " values");
  }
  if (r.remaining() > expected) {
    throw LoadError(LoadErrorKind::kCountMismatch,
                    context + ": " + std::to_string(r.remaining() - expected) +
                        " trailing bytes after payload");
  }
  Bag bag;
  bag.instances.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<double> values(m);
    for (std::size_t j = 0; j < m; ++j) {
      const float f = r.f32();
      if (!std::isfinite(f)) {
        throw LoadError(LoadErrorKind::kNonFinite, context + ": instance " + std::to_string(i) +
                                                       " element " + std::to_string(j));
      }
      values[j] = static_cast<double>(f);
    }
    bag.instances.push_back({Vector(std::move(values)), shape});
  }
  return bag;
}

void write_bag(const std::filesystem::path& path, const Bag& bag) {
  io::write_file_atomic(path, encode_bag(bag));
}

Bag read_bag_file(const std::filesystem::path& path) {
  return decode_bag(io::read_file(path), path.string());
}

std::size_t DatasetManifest::classes() const {
  if (!class_names.empty()) return class_names.size();
  int hi = -1;
  for (const auto& r : records) hi = std::max(hi, r.label);
  return static_cast<std::size_t>(hi + 1);
}

void DatasetManifest::validate() const {
  auto fail = [](const std::string& what) {
    throw LoadError(LoadErrorKind::kValidation, what);
  };
  std::set<std::string> seen;
  const std::size_t c = classes();
  for (const auto& r : records) {
    if (r.bag_id.empty()) fail("record with empty bag_id");
    if (!seen.insert(r.bag_id).second) fail("duplicate bag_id '" + r.bag_id + "'");
    if (r.label < 0 || static_cast<std::size_t>(r.label) >= c) {
      fail("bag '" + r.bag_id + "' label " + std::to_string(r.label) + " outside [0, " +
           std::to_string(c) + ")");
    }
    if (r.n_instances == 0) fail("bag '" + r.bag_id + "' has n_instances = 0");
    if (r.path.empty()) fail("bag '" + r.bag_id + "' has no path");
    for (std::size_t wi : r.witnesses) {
      if (wi >= r.n_instances) fail("bag '" + r.bag_id + "' witness index out of range");
    }
  }
}

DatasetManifest parse_manifest(std::string_view text, const std::string& context) {
  static const std::set<std::string> kRecordKeys = {"bag_id", "label", "path",
                                                    "n_instances", "shape", "witnesses"};
  DatasetManifest manifest;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header_allowed = true;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    const std::string where = context + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LoadError(LoadErrorKind::kParse, where + ": " + e.what());
    }
    if (!j.is_object()) throw LoadError(LoadErrorKind::kParse, where + ": expected an object");
    try {
      if (j.contains("class_names")) {
        if (!header_allowed || j.size() != 1) {
          throw LoadError(LoadErrorKind::kParse,
                          where + ": class_names header must be the first line, alone");
        }
        manifest.class_names = j.at("class_names").get<std::vector<std::string>>();
        header_allowed = false;
        continue;
      }
      header_allowed = false;
      for (const auto& [key, _] : j.items()) {
        if (!kRecordKeys.count(key)) {
          throw LoadError(LoadErrorKind::kParse, where + ": unknown key '" + key + "'");
        }
      }
      ManifestRecord rec;
      rec.bag_id = j.at("bag_id").get<std::string>();
      rec.label = j.at("label").get<int>();
      rec.path = j.at("path").get<std::string>();
      const auto n = j.at("n_instances").get<long long>();
      if (n < 0) throw LoadError(LoadErrorKind::kValidation, where + ": negative n_instances");
      rec.n_instances = static_cast<std::size_t>(n);
      if (j.contains("shape")) {
        const auto s = j.at("shape").get<std::vector<std::size_t>>();
        if (s.size() != 2) throw LoadError(LoadErrorKind::kParse, where + ": shape needs [P, D]");
        rec.shape = Shape2D{s[0], s[1]};
      }
      if (j.contains("witnesses")) rec.witnesses = j.at("witnesses").get<std::vector<std::size_t>>();
      manifest.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw LoadError(LoadErrorKind::kParse, where + ": " + e.what());
    }
  }
  manifest.validate();
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  DatasetManifest m = parse_manifest(io::read_file(path), path.string());
  m.base_dir = path.parent_path();
  return m;
}

std::string encode_manifest(const DatasetManifest& manifest) {
  std::string out;
  if (!manifest.class_names.empty()) {
    out += json{{"class_names", manifest.class_names}}.dump() + "\n";
  }
  for (const auto& r : manifest.records) {
    json j = json::object();
    j["bag_id"] = r.bag_id;
    j["label"] = r.label;
    j["path"] = r.path;
    j["n_instances"] = r.n_instances;
    if (r.shape) j["shape"] = {r.shape->patches, r.shape->dims};
    if (!r.witnesses.empty()) j["witnesses"] = r.witnesses;
    out += j.dump() + "\n";
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  io::write_file_atomic(path, encode_manifest(manifest));
}

Bag load_bag(const ManifestRecord& record, const std::filesystem::path& base_dir) {
  std::filesystem::path p(record.path);
  if (p.is_relative()) p = base_dir / p;
  Bag bag = read_bag_file(p);
  if (bag.size() != record.n_instances) {
    throw LoadError(LoadErrorKind::kCountMismatch,
                    "bag '" + record.bag_id + "': manifest says " +
                        std::to_string(record.n_instances) + " instances, file holds " +
                        std::to_string(bag.size()));
  }
  if (record.shape && bag.instances.front().shape != record.shape) {
    throw LoadError(LoadErrorKind::kShapeMismatch,
                    "bag '" + record.bag_id + "': file shape differs from manifest");
  }
  bag.id = record.bag_id;
  bag.label = record.label;
  if (!record.witnesses.empty()) {
    std::string w;
    for (std::size_t i = 0; i < record.witnesses.size(); ++i) {
      if (i) w += ',';
      w += std::to_string(record.witnesses[i]);
    }
    bag.meta["witnesses"] = w;
  }
  return bag;
}

std::vector<Bag> load_dataset(const DatasetManifest& manifest) {
  std::vector<Bag> bags;
  bags.reserve(manifest.records.size());
  for (const auto& r : manifest.records) bags.push_back(load_bag(r, manifest.base_dir));
  return bags;
}

std::vector<std::size_t> witnesses_of(const Bag& bag) {
  std::vector<std::size_t> out;
  auto it = bag.meta.find("witnesses");
  if (it == bag.meta.end()) return out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

Bag parse_csv(std::string_view text, char delimiter, const std::string& context) {
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  std::size_t row_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::vector<double> row;
    std::size_t cell_start = 0;
    std::size_t col = 0;
    while (true) {
      std::size_t cell_end = line.find(delimiter, cell_start);
      if (cell_end == std::string_view::npos) cell_end = line.size();
      std::string_view cell = line.substr(cell_start, cell_end - cell_start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      ++col;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw LoadError(LoadErrorKind::kParse, context + ": row " + std::to_string(row_no) +
                                                   " column " + std::to_string(col) +
                                                   ": not a number '" + std::string(cell) + "'");
      }
      if (!std::isfinite(v)) {
        throw LoadError(LoadErrorKind::kNonFinite, context + ": row " + std::to_string(row_no) +
                                                       " column " + std::to_string(col));
      }
      row.push_back(v);
      if (cell_end == line.size()) break;
      cell_start = cell_end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw LoadError(LoadErrorKind::kParse,
                      context + ": ragged row " + std::to_string(row_no) + " has " +
                          std::to_string(row.size()) + " columns, expected " +
                          std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(context + ": no rows");
  return Bag::from_rows(std::move(rows), context);
}

Bag import_csv(const std::filesystem::path& path, char delimiter) {
  return parse_csv(io::read_file(path), delimiter, path.string());
}

}  // namespace mivc
