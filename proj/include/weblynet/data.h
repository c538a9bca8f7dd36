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

#ifndef WEBLYNET_DATA_H_
#define WEBLYNET_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "weblynet/tensor.h"

namespace weblynet {

class N1Network;

enum class Split { kTrain, kVal, kTest, kPretrain };

std::string_view split_name(Split split);

// Multi-hot, one entry per class.
using LabelVector = std::vector<std::uint8_t>;

// The part of a recording that training code is allowed to see.
struct TrainingExample {
  std::string id;
  Tensor view1;  // segments x embedding
  Tensor view2;  // transfer vector; undefined until build_view2
  LabelVector labels;

  std::size_t num_segments() const { return view1.dim(0); }
};

enum class NoiseFlag : std::uint8_t { kClean, kFalsePositive };

// Ground truth kept next to synthetic recordings for noise accounting only.
struct NoiseAnnotation {
  LabelVector true_labels;
  std::vector<NoiseFlag> flags;  // per class
};

struct Recording {
  TrainingExample example;
  std::optional<NoiseAnnotation> annotation;
  // Feature file path relative to the manifest, when loaded from one.
  std::string feature_file;
};

// Recordings sharing one class list. Validated on insertion; immutable once
// handed out.
class Dataset {
 public:
  explicit Dataset(std::vector<std::string> class_names,
                   Split split = Split::kTrain);

  // Throws DataError on duplicate ids, label-length mismatch, an empty
  // label set or annotations that disagree with the observed labels.
  void add(Recording recording);

  std::span<const Recording> recordings() const { return recordings_; }
  const Recording& operator[](std::size_t i) const { return recordings_[i]; }
  std::size_t size() const { return recordings_.size(); }
  bool empty() const { return recordings_.empty(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::size_t num_classes() const { return class_names_.size(); }
  Split split() const { return split_; }

  bool has_annotations() const;
  // The projection handed to training: no ground truth, no noise flags.
  std::vector<const TrainingExample*> training_examples() const;
  Dataset subset(std::span<const std::size_t> indices, Split split) const;
  // Same recordings with noise annotations and ground truth dropped.
  Dataset without_annotations() const;

 private:
  std::vector<std::string> class_names_;
  Split split_;
  std::vector<Recording> recordings_;
  std::unordered_set<std::string> ids_;
};

// Seeded train/validation split: `fraction` of the recordings (at least one
// when the dataset has two or more) become the validation set.
std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction,
                                             std::uint64_t seed);

// Class-conditional label noise. fp_rate[c] is the expected fraction of the
// observed positives of class c that are spurious. False negatives are not
// modelled.
struct NoiseModel {
  std::vector<double> fp_rate;

  static NoiseModel none(std::size_t num_classes);
  static NoiseModel uniform(std::size_t num_classes, double rate);
  double fn_rate(std::size_t) const { return 0.0; }
  void validate(std::size_t num_classes) const;
};

struct SyntheticOptions {
  std::size_t embedding_dim = 128;
  // Extra sound classes present in the world but never labelled in webly
  // data. Pretraining data is labelled over all classes.
  std::size_t auxiliary_classes = 10;
  // Sub-prototypes per class (intra-class variation).
  std::size_t modes_per_class = 2;
  // Norm of the jitter added to a class centre before renormalising a mode.
  double mode_spread = 0.6;
  double min_angle_deg = 60.0;
  // Std (in embedding dimensions) of the Gaussian kernel that correlates
  // neighbouring prototype coordinates; 0 draws white prototypes.
  double prototype_smoothing = 0.0;
  // Each event's pattern is rotated along the embedding axis by a uniform
  // offset in [-max_shift, max_shift].
  std::size_t max_shift = 0;
  // Fraction of classes whose events alternate in sign from one segment to
  // the next, so their contribution nearly cancels in a segment average.
  double modulated_fraction = 0.0;
  std::size_t min_segments = 8;
  std::size_t max_segments = 24;
  // Relative probabilities of 1, 2 and 3 true classes per recording.
  std::vector<double> cardinality_weights{0.6, 0.3, 0.1};
  // Probability that each auxiliary class sounds in a webly recording.
  double auxiliary_rate = 0.15;
  double amplitude_min = 0.6;
  double amplitude_max = 1.2;
  // Fraction of a recording's segments covered by one event.
  double coverage_min = 0.2;
  double coverage_max = 0.8;
  // Per-segment Gaussian perturbation, as expected vector norm.
  double perturbation = 1.0;
  // Per-recording constant offset, norm uniform in [0, background].
  double background = 0.5;
};

// Latent geometry shared by every split drawn from it: unit-norm prototypes
// in embedding space with a minimum pairwise angle.
class SyntheticWorld {
 public:
  SyntheticWorld(std::size_t num_classes, std::uint64_t seed,
                 SyntheticOptions options = {});

  // Webly-style data over the target classes, with label noise applied.
  Dataset generate(std::size_t n_recordings, const NoiseModel& noise,
                   std::uint64_t seed, Split split = Split::kTrain) const;
  // Clean data labelled over target plus auxiliary classes.
  Dataset generate_pretraining(std::size_t n_recordings,
                               std::uint64_t seed) const;

  std::size_t num_classes() const { return num_classes_; }
  std::size_t total_classes() const;
  const SyntheticOptions& options() const { return options_; }
  // Prototype of (class, mode) as a unit vector.
  std::span<const double> prototype(std::size_t cls, std::size_t mode) const;
  bool modulated(std::size_t cls) const { return modulated_[cls] != 0; }

 private:
  Dataset draw(std::size_t n_recordings, std::size_t labelled_classes,
               bool pretraining, std::uint64_t seed, Split split) const;

  std::size_t num_classes_;
  SyntheticOptions options_;
  std::vector<double> prototypes_;       // (class * modes + mode) x dim
  std::vector<std::uint8_t> modulated_;  // per class
};

// One world per call, seeded by `seed`.
Dataset generate_synthetic(std::size_t n_recordings, std::size_t num_classes,
                           const NoiseModel& noise, std::uint64_t seed);

// WBL1 feature file: "WBL1", u32 rows, u32 dim, u8 endianness tag (1 =
// little), then rows*dim little-endian doubles.
void write_feature_file(const std::filesystem::path& path,
                        const Tensor& matrix);
Tensor read_feature_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::vector<std::string> labels;
  std::string feature_file;
  std::size_t n_segments = 0;
};

std::vector<ManifestEntry> read_manifest_entries(
    const std::filesystem::path& manifest);
// Loads every entry; feature paths resolve against the manifest directory.
Dataset load_manifest(const std::filesystem::path& manifest,
                      std::vector<std::string> class_names,
                      Split split = Split::kTrain);
// Writes one canonical JSON record per line. Recordings without a
// feature_file get "features/<id>.wbl"; feature files are written next to
// the manifest unless `write_features` is false.
void write_manifest(const Dataset& ds, const std::filesystem::path& manifest,
                    bool write_features = true);

// Dataset directory used between CLI stages: manifest.jsonl plus
// classes.json, feature files and, when present, transfer vectors and noise
// annotations.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Attaches view2 = pretrained.extract_f2(view1) to every recording. The
// network is used in eval mode.
Dataset build_view2(N1Network& pretrained, const Dataset& ds);

}  // namespace weblynet

#endif  // WEBLYNET_DATA_H_
