#pragma once

// Feature datasets with a base/validation/novel class split.
//
// Binary feature file (little-endian):
//   "GDCF" | version u32 = 1 | dim u32 | point_count u64 | point_count x [class_id u32][dim x f32]
// CSV feature file:
//   class_id,f0,...,f{d-1}   (header), then one row per point.
// Manifest (JSON, separate file):
//   {"base":[ids], "validation":[ids], "novel":[ids], "names":{"id":"name"}}

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gdc/binio.hpp"
#include "gdc/common.hpp"

namespace gdc {

enum class Split { Base, Validation, Novel };

inline std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Base: return "base";
    case Split::Validation: return "validation";
    case Split::Novel: return "novel";
  }
  return "unknown";
}

inline Split parse_split(std::string_view name) {
  if (name == "base") return Split::Base;
  if (name == "validation") return Split::Validation;
  if (name == "novel") return Split::Novel;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

enum class FileFormat { Binary, Csv };

inline FileFormat parse_format(std::string_view name) {
  if (name == "binary") return FileFormat::Binary;
  if (name == "csv") return FileFormat::Csv;
  throw ValidationError("unknown feature format '" + std::string(name) + "'");
}

struct SplitManifest {
  std::set<ClassId> base;
  std::set<ClassId> validation;
  std::set<ClassId> novel;
  std::map<ClassId, std::string> names;

  const std::set<ClassId>& classes(Split s) const noexcept {
    switch (s) {
      case Split::Base: return base;
      case Split::Validation: return validation;
      case Split::Novel: return novel;
    }
    return base;
  }

  std::optional<Split> split_of(ClassId id) const {
    if (base.contains(id)) return Split::Base;
    if (validation.contains(id)) return Split::Validation;
    if (novel.contains(id)) return Split::Novel;
    return std::nullopt;
  }

  /// Throws unless the three sets are pairwise disjoint.
  void check_disjoint() const {
    auto overlap = [](const std::set<ClassId>& a, const std::set<ClassId>& b)
        -> std::optional<ClassId> {
      for (ClassId id : a) {
        if (b.contains(id)) return id;
      }
      return std::nullopt;
    };
    if (auto id = overlap(base, validation)) {
      throw ValidationError("manifest: class " + std::to_string(*id) + " is in base and validation");
    }
    if (auto id = overlap(base, novel)) {
      throw ValidationError("manifest: class " + std::to_string(*id) + " is in base and novel");
    }
    if (auto id = overlap(validation, novel)) {
      throw ValidationError("manifest: class " + std::to_string(*id) +
                            " is in validation and novel");
    }
  }

  bool operator==(const SplitManifest&) const = default;
};

inline nlohmann::json manifest_to_json(const SplitManifest& m) {
  nlohmann::json j;
  j["base"] = std::vector<ClassId>(m.base.begin(), m.base.end());
  j["validation"] = std::vector<ClassId>(m.validation.begin(), m.validation.end());
  j["novel"] = std::vector<ClassId>(m.novel.begin(), m.novel.end());
  if (!m.names.empty()) {
    nlohmann::json names = nlohmann::json::object();
    for (const auto& [id, name] : m.names) names[std::to_string(id)] = name;
    j["names"] = names;
  }
  return j;
}

inline SplitManifest manifest_from_json(const nlohmann::json& j, const std::string& source) {
  SplitManifest m;
  auto read_ids = [&](const char* key, std::set<ClassId>& out) {
    if (!j.contains(key)) throw ValidationError(source + ": manifest missing '" + key + "'");
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ValidationError(source + ": manifest '" + key + "' is not an array");
    for (const auto& v : arr) {
      if (!v.is_number_unsigned() || v.get<std::uint64_t>() > UINT32_MAX) {
        throw ValidationError(source + ": manifest '" + key + "' holds a non class id " + v.dump());
      }
      if (!out.insert(v.get<ClassId>()).second) {
        throw ValidationError(source + ": manifest '" + key + "' repeats class " + v.dump());
      }
    }
  };
  if (!j.is_object()) throw ValidationError(source + ": manifest must be a JSON object");
  read_ids("base", m.base);
  read_ids("validation", m.validation);
  read_ids("novel", m.novel);
  if (j.contains("names")) {
    for (const auto& [key, value] : j.at("names").items()) {
      ClassId id = 0;
      auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
      if (ec != std::errc{} || ptr != key.data() + key.size() || !value.is_string()) {
        throw ValidationError(source + ": bad names entry '" + key + "'");
      }
      m.names[id] = value.get<std::string>();
    }
  }
  m.check_disjoint();
  return m;
}

inline SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return manifest_from_json(j, path.string());
}

inline void write_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

class FeatureDataset;

/// The points of one split, grouped by class. Indices refer to dataset rows.
struct PartitionView {
  const FeatureDataset* dataset = nullptr;
  Split split = Split::Base;
  std::vector<ClassId> classes;                         // ascending
  std::map<ClassId, std::vector<std::size_t>> members;  // file order within class

  std::size_t point_count() const {
    std::size_t n = 0;
    for (const auto& [id, rows] : members) n += rows.size();
    return n;
  }
};

/// Immutable after construction; the constructor enforces every invariant.
class FeatureDataset {
 public:
  FeatureDataset(std::uint32_t dim, std::vector<ClassId> labels, RowMatrixF features,
                 SplitManifest manifest)
      : dim_(dim),
        labels_(std::move(labels)),
        features_(std::move(features)),
        manifest_(std::move(manifest)) {
    validate();
  }

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<ClassId>& labels() const noexcept { return labels_; }
  ClassId label(std::size_t row) const { return labels_.at(row); }
  const RowMatrixF& features() const noexcept { return features_; }
  auto row(std::size_t i) const { return features_.row(static_cast<Eigen::Index>(i)); }
  const SplitManifest& manifest() const noexcept { return manifest_; }

  /// Distinct class ids present in the data, ascending.
  std::vector<ClassId> classes() const {
    std::set<ClassId> ids(labels_.begin(), labels_.end());
    return {ids.begin(), ids.end()};
  }

  PartitionView partition(Split split) const {
    PartitionView view;
    view.dataset = this;
    view.split = split;
    const auto& wanted = manifest_.classes(split);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (wanted.contains(labels_[i])) view.members[labels_[i]].push_back(i);
    }
    for (const auto& [id, rows] : view.members) view.classes.push_back(id);
    return view;
  }

  bool operator==(const FeatureDataset& other) const {
    return dim_ == other.dim_ && labels_ == other.labels_ && manifest_ == other.manifest_ &&
           features_.rows() == other.features_.rows() &&
           features_.cols() == other.features_.cols() &&
           std::equal(features_.data(), features_.data() + features_.size(),
                      other.features_.data(), [](float a, float b) {
                        return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
                      });
  }

 private:
  void validate() const {
    if (dim_ == 0) throw ValidationError("dataset dimension must be positive");
    if (labels_.empty()) throw ValidationError("dataset has no points");
    if (features_.rows() != static_cast<Eigen::Index>(labels_.size()) ||
        features_.cols() != static_cast<Eigen::Index>(dim_)) {
      throw ValidationError("feature matrix shape does not match labels and dim");
    }
    manifest_.check_disjoint();
    const auto present = classes();
    for (ClassId id : present) {
      if (!manifest_.split_of(id)) {
        throw ValidationError("class " + std::to_string(id) + " is not assigned to any split");
      }
    }
    for (Split s : {Split::Base, Split::Validation, Split::Novel}) {
      for (ClassId id : manifest_.classes(s)) {
        if (!std::binary_search(present.begin(), present.end(), id)) {
          throw ValidationError("manifest lists class " + std::to_string(id) + " in " +
                                std::string(to_string(s)) + " but it has no points");
        }
      }
      if (manifest_.classes(s).empty()) {
        throw ValidationError("split '" + std::string(to_string(s)) + "' has no classes");
      }
    }
  }

  std::uint32_t dim_;
  std::vector<ClassId> labels_;
  RowMatrixF features_;
  SplitManifest manifest_;
};

/// Labelled rows without a manifest, as stored in a feature file.
struct FeatureRecords {
  std::uint32_t dim = 0;
  std::vector<ClassId> labels;
  RowMatrixF features;
};

inline constexpr std::string_view kFeatureMagic = "GDCF";
inline constexpr std::uint32_t kFeatureVersion = 1;

inline FeatureRecords read_feature_records_binary(const std::filesystem::path& path) {
  auto in = binio::ByteReader::from_file(path);
  const auto h = binio::read_header(in, kFeatureMagic, kFeatureVersion,
                                    [](std::uint64_t d) { return 4 + 4 * d; });
  FeatureRecords r;
  r.dim = h.dim;
  r.labels.resize(h.count);
  r.features.resize(static_cast<Eigen::Index>(h.count), h.dim);
  for (std::uint64_t i = 0; i < h.count; ++i) {
    r.labels[i] = in.u32();
    for (std::uint32_t j = 0; j < h.dim; ++j) {
      r.features(static_cast<Eigen::Index>(i), j) = in.f32();
    }
  }
  return r;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& c : cells) {
    while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
    while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) {
      c.remove_suffix(1);
    }
  }
  return cells;
}

}  // namespace detail

inline FeatureRecords read_feature_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  const std::string src = path.string();
  std::string line;
  if (!std::getline(in, line) || detail::split_csv(line).front().empty()) {
    throw ValidationError(src + ": empty file (row 1)");
  }
  const auto header = detail::split_csv(line);
  if (header.size() < 2 || header[0] != "class_id") {
    throw ValidationError(src + ": malformed header, expected 'class_id,f0,...' (row 1)");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j - 1)) {
      throw ValidationError(src + ": malformed header column '" + std::string(header[j]) +
                            "' (row 1)");
    }
  }
  FeatureRecords r;
  r.dim = static_cast<std::uint32_t>(header.size() - 1);
  std::vector<float> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != r.dim + 1) {
      throw ValidationError(src + ": dimension mismatch at row " + std::to_string(row) +
                            ", expected " + std::to_string(r.dim) + " values, got " +
                            std::to_string(cells.size() - 1));
    }
    ClassId id = 0;
    auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), id);
    if (ec != std::errc{} || p != cells[0].data() + cells[0].size()) {
      throw ValidationError(src + ": bad class_id '" + std::string(cells[0]) + "' at row " +
                            std::to_string(row));
    }
    r.labels.push_back(id);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      float v = 0.0F;
      auto [q, ec2] = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
      if (ec2 != std::errc{} || q != cells[j].data() + cells[j].size()) {
        throw ValidationError(src + ": bad value '" + std::string(cells[j]) + "' at row " +
                              std::to_string(row) + ", column " + std::to_string(j));
      }
      values.push_back(v);
    }
  }
  if (r.labels.empty()) throw ValidationError(src + ": no data rows (row 1)");
  r.features = Eigen::Map<RowMatrixF>(values.data(), static_cast<Eigen::Index>(r.labels.size()),
                                      r.dim);
  return r;
}

inline FeatureRecords read_feature_records(const std::filesystem::path& path, FileFormat format) {
  return format == FileFormat::Binary ? read_feature_records_binary(path)
                                      : read_feature_records_csv(path);
}

inline FeatureDataset load_features(const std::filesystem::path& path, FileFormat format,
                                    SplitManifest manifest) {
  auto r = read_feature_records(path, format);
  return FeatureDataset(r.dim, std::move(r.labels), std::move(r.features), std::move(manifest));
}

inline FeatureDataset load_features(const std::filesystem::path& path, FileFormat format,
                                    const std::filesystem::path& manifest_path) {
  return load_features(path, format, load_manifest(manifest_path));
}

/// Writes the feature file only; the manifest goes through write_manifest.
inline void write_features(const FeatureDataset& ds, const std::filesystem::path& path,
                           FileFormat format) {
  if (format == FileFormat::Binary) {
    binio::ByteWriter w;
    w.header(kFeatureMagic, kFeatureVersion, ds.dim(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      w.u32(ds.label(i));
      for (std::uint32_t j = 0; j < ds.dim(); ++j) w.f32(ds.features()(Eigen::Index(i), j));
    }
    w.save(path);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << "class_id";
  for (std::uint32_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.label(i);
    for (std::uint32_t j = 0; j < ds.dim(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, ds.features()(Eigen::Index(i), j));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

}  // namespace gdc
