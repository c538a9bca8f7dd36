/*
 * Copyright 2026 The WeblyNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>

#include "binary_io.h"
#include "json.hpp"
#include "weblynet/data.h"
#include "weblynet/errors.h"

namespace weblynet {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr char kFeatureMagic[4] = {'W', 'B', 'L', '1'};
constexpr std::uint8_t kLittleEndian = 1;

std::vector<std::string> names_of(const LabelVector& labels,
                                  const std::vector<std::string>& classes) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (labels[c]) out.push_back(classes[c]);
  }
  return out;
}

LabelVector labels_from_names(const std::vector<std::string>& names,
                              const std::vector<std::string>& classes,
                              const std::string& id) {
  LabelVector labels(classes.size(), 0);
  for (const std::string& name : names) {
    const auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end()) {
      throw DataError("recording '" + id + "' has label '" + name +
                      "' outside the class list");
    }
    labels[it - classes.begin()] = 1;
  }
  return labels;
}

std::string default_feature_path(const std::string& id) {
  return "features/" + id + ".wbl";
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

void write_feature_file(const fs::path& path, const Tensor& matrix) {
  if (matrix.rank() != 2) {
    throw DimensionError("feature files hold matrices, got " +
                         shape_to_string(matrix.shape()));
  }
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature file " + path.string());
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  internal::write_le<std::uint32_t>(out,
                                    static_cast<std::uint32_t>(matrix.dim(0)));
  internal::write_le<std::uint32_t>(out,
                                    static_cast<std::uint32_t>(matrix.dim(1)));
  internal::write_le<std::uint8_t>(out, kLittleEndian);
  internal::write_doubles(out, matrix.data());
  if (!out) throw DataError("failed writing feature file " + path.string());
}

Tensor read_feature_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  const std::string what = "feature file " + path.string();
  if (internal::read_bytes(in, 4, what) != std::string(kFeatureMagic, 4)) {
    throw DataError(path.string() + " is not a WBL1 feature file");
  }
  const auto rows = internal::read_le<std::uint32_t>(in, what);
  const auto dim = internal::read_le<std::uint32_t>(in, what);
  const auto tag = internal::read_le<std::uint8_t>(in, what);
  if (tag != kLittleEndian) {
    throw DataError(what + " has unsupported endianness tag " +
                    std::to_string(tag));
  }
  if (rows == 0 || dim == 0) throw DataError(what + " is empty");
  std::vector<double> values(static_cast<std::size_t>(rows) * dim);
  internal::read_doubles(in, values, what);
  return Tensor({rows, dim}, std::move(values));
}

namespace {

struct ManifestLine {
  ManifestEntry entry;
  json raw;
};

std::vector<ManifestLine> parse_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  std::vector<ManifestLine> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char ch) { return std::isspace(ch); })) {
      continue;
    }
    try {
      ManifestLine parsed;
      parsed.raw = json::parse(line);
      ManifestEntry& e = parsed.entry;
      e.id = parsed.raw.at("id").get<std::string>();
      e.labels = parsed.raw.at("labels").get<std::vector<std::string>>();
      e.feature_file = parsed.raw.at("feature_file").get<std::string>();
      e.n_segments = parsed.raw.at("n_segments").get<std::size_t>();
      lines.push_back(std::move(parsed));
    } catch (const json::exception& e) {
      throw DataError(manifest.string() + ":" + std::to_string(line_no) +
                      ": malformed manifest record: " + e.what());
    }
  }
  return lines;
}

}  // namespace

std::vector<ManifestEntry> read_manifest_entries(const fs::path& manifest) {
  std::vector<ManifestEntry> entries;
  for (ManifestLine& line : parse_manifest(manifest)) {
    entries.push_back(std::move(line.entry));
  }
  return entries;
}

Dataset load_manifest(const fs::path& manifest,
                      std::vector<std::string> class_names, Split split) {
  const fs::path base = manifest.parent_path();
  Dataset ds(std::move(class_names), split);
  for (const ManifestLine& line : parse_manifest(manifest)) {
    const ManifestEntry& e = line.entry;
    const json& j = line.raw;
    const fs::path feature_path = base / e.feature_file;
    if (!fs::exists(feature_path)) {
      throw DataError("recording '" + e.id + "': missing feature file " +
                      feature_path.string());
    }
    Recording rec;
    rec.example.id = e.id;
    rec.feature_file = e.feature_file;
    rec.example.view1 = read_feature_file(feature_path);
    if (rec.example.view1.dim(0) != e.n_segments) {
      throw DataError("recording '" + e.id + "': manifest says " +
                      std::to_string(e.n_segments) + " segments, file has " +
                      std::to_string(rec.example.view1.dim(0)));
    }
    rec.example.labels = labels_from_names(e.labels, ds.class_names(), e.id);
    // Optional fields written by save_dataset.
    if (j.contains("view2_file")) {
      const fs::path v2 = base / j.at("view2_file").get<std::string>();
      if (!fs::exists(v2)) {
        throw DataError("recording '" + e.id + "': missing view2 file " +
                        v2.string());
      }
      const Tensor m = read_feature_file(v2);
      rec.example.view2 = Tensor(
          {m.numel()}, std::vector<double>(m.data().begin(), m.data().end()));
    }
    if (j.contains("true_labels")) {
      NoiseAnnotation a;
      a.true_labels =
          labels_from_names(j.at("true_labels").get<std::vector<std::string>>(),
                            ds.class_names(), e.id);
      for (std::size_t c = 0; c < ds.num_classes(); ++c) {
        a.flags.push_back(rec.example.labels[c] && !a.true_labels[c]
                              ? NoiseFlag::kFalsePositive
                              : NoiseFlag::kClean);
      }
      rec.annotation = std::move(a);
    }
    ds.add(std::move(rec));
  }
  return ds;
}

void write_manifest(const Dataset& ds, const fs::path& manifest,
                    bool write_features) {
  ensure_parent(manifest);
  const fs::path base = manifest.parent_path();
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + manifest.string());
  for (const Recording& r : ds.recordings()) {
    const TrainingExample& ex = r.example;
    const std::string feature_file =
        r.feature_file.empty() ? default_feature_path(ex.id) : r.feature_file;
    json j;
    j["id"] = ex.id;
    j["labels"] = names_of(ex.labels, ds.class_names());
    j["feature_file"] = feature_file;
    j["n_segments"] = ex.num_segments();
    if (write_features) {
      write_feature_file(base / feature_file, ex.view1);
      if (ex.view2.defined()) {
        const std::string v2 = "view2/" + ex.id + ".wbl";
        write_feature_file(base / v2,
                           Tensor({1, ex.view2.numel()},
                                  std::vector<double>(ex.view2.data().begin(),
                                                      ex.view2.data().end())));
        j["view2_file"] = v2;
      }
    }
    if (r.annotation) {
      j["true_labels"] = names_of(r.annotation->true_labels, ds.class_names());
    }
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("failed writing manifest " + manifest.string());
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json meta;
  meta["classes"] = ds.class_names();
  meta["split"] = split_name(ds.split());
  std::ofstream(dir / "classes.json", std::ios::trunc) << meta.dump(2) << "\n";
  write_manifest(ds, dir / "manifest.jsonl", /*write_features=*/true);
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "classes.json");
  if (!in) throw DataError("no classes.json in " + dir.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed classes.json: " + std::string(e.what()));
  }
  Split split = Split::kTrain;
  const std::string name = meta.value("split", "train");
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest, Split::kPretrain}) {
    if (split_name(s) == name) split = s;
  }
  return load_manifest(dir / "manifest.jsonl",
                       meta.at("classes").get<std::vector<std::string>>(),
                       split);
}

}  // namespace weblynet
