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

#include "weblynet/data.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "random.h"
#include "weblynet/errors.h"
#include "weblynet/networks.h"

namespace weblynet {
namespace {

using internal::canonical;
using internal::derive_seed;

constexpr double kPi = 3.14159265358979323846;

// Uniform integer in [lo, hi].
std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo,
                          std::size_t hi) {
  const std::size_t span = hi - lo + 1;
  return lo +
         std::min(span - 1, static_cast<std::size_t>(
                                canonical(rng) * static_cast<double>(span)));
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * canonical(rng);
}

// Box-Muller; one draw per call keeps the stream easy to reason about.
double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - canonical(rng);  // (0, 1]
  const double u2 = canonical(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

// First `k` entries of a seeded Fisher-Yates shuffle of `items`.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t k,
                     std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k && i + 1 < items.size(); ++i) {
    std::swap(items[i], items[uniform_index(rng, i, items.size() - 1)]);
  }
}

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = standard_normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Unit vector with coordinates correlated along the (circular) axis.
std::vector<double> random_smooth_unit(std::size_t dim, double smoothing,
                                       std::mt19937_64& rng) {
  std::vector<double> white = random_unit(dim, rng);
  if (smoothing <= 0.0) return white;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * smoothing));
  std::vector<double> kernel;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double z = static_cast<double>(k) / smoothing;
    kernel.push_back(std::exp(-0.5 * z * z));
  }
  const auto n = static_cast<std::ptrdiff_t>(dim);
  std::vector<double> v(dim, 0.0);
  double norm = 0.0;
  for (std::ptrdiff_t d = 0; d < n; ++d) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
      acc += kernel[static_cast<std::size_t>(k + radius)] *
             white[static_cast<std::size_t>(((d + k) % n + n) % n)];
    }
    v[static_cast<std::size_t>(d)] = acc;
    norm += acc * acc;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::string padded(std::size_t i, int width) {
  std::string s = std::to_string(i);
  return std::string(
             s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0,
             '0') +
         s;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
    case Split::kPretrain:
      return "pretrain";
  }
  return "unknown";
}

Dataset::Dataset(std::vector<std::string> class_names, Split split)
    : class_names_(std::move(class_names)), split_(split) {}

void Dataset::add(Recording recording) {
  const TrainingExample& ex = recording.example;
  if (!ex.view1.defined() || ex.view1.rank() != 2) {
    throw DataError("recording '" + ex.id +
                    "' needs a segments x embedding view1");
  }
  if (ex.labels.size() != num_classes()) {
    throw DataError("recording '" + ex.id + "' has " +
                    std::to_string(ex.labels.size()) + " labels for " +
                    std::to_string(num_classes()) + " classes");
  }
  if (std::none_of(ex.labels.begin(), ex.labels.end(),
                   [](std::uint8_t y) { return y != 0; })) {
    throw DataError("recording '" + ex.id + "' has no positive label");
  }
  if (recording.annotation) {
    const NoiseAnnotation& a = *recording.annotation;
    if (a.true_labels.size() != num_classes() ||
        a.flags.size() != num_classes()) {
      throw DataError("recording '" + ex.id + "' has malformed annotations");
    }
    for (std::size_t c = 0; c < num_classes(); ++c) {
      const bool spurious = ex.labels[c] != 0 && a.true_labels[c] == 0;
      if (spurious != (a.flags[c] == NoiseFlag::kFalsePositive)) {
        throw DataError("recording '" + ex.id +
                        "' has noise flags inconsistent with its labels");
      }
    }
  }
  if (!ids_.insert(ex.id).second) {
    throw DataError("duplicate recording id '" + ex.id + "'");
  }
  recordings_.push_back(std::move(recording));
}

bool Dataset::has_annotations() const {
  return !recordings_.empty() &&
         std::all_of(
             recordings_.begin(), recordings_.end(),
             [](const Recording& r) { return r.annotation.has_value(); });
}

std::vector<const TrainingExample*> Dataset::training_examples() const {
  std::vector<const TrainingExample*> out;
  out.reserve(recordings_.size());
  for (const Recording& r : recordings_) out.push_back(&r.example);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices,
                        Split split) const {
  Dataset out(class_names_, split);
  for (const std::size_t i : indices) out.add(recordings_.at(i));
  return out;
}

Dataset Dataset::without_annotations() const {
  Dataset out(class_names_, split_);
  for (const Recording& r : recordings_) {
    Recording copy = r;
    copy.annotation.reset();
    out.add(std::move(copy));
  }
  return out;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ContractError("validation fraction must lie in [0, 1)");
  }
  const std::size_t n = ds.size();
  std::size_t n_val =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (fraction > 0.0 && n >= 2)
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x5a11));
  partial_shuffle(order, n_val, rng);
  std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train(order.begin() + n_val, order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {ds.subset(train, ds.split()), ds.subset(val, Split::kVal)};
}

NoiseModel NoiseModel::none(std::size_t num_classes) {
  return uniform(num_classes, 0.0);
}

NoiseModel NoiseModel::uniform(std::size_t num_classes, double rate) {
  return NoiseModel{std::vector<double>(num_classes, rate)};
}

void NoiseModel::validate(std::size_t num_classes) const {
  if (fp_rate.size() != num_classes) {
    throw ContractError("noise model has " + std::to_string(fp_rate.size()) +
                        " rates for " + std::to_string(num_classes) +
                        " classes");
  }
  for (const double r : fp_rate) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw ContractError("false-positive rate " + std::to_string(r) +
                          " outside [0, 1)");
    }
  }
}

SyntheticWorld::SyntheticWorld(std::size_t num_classes, std::uint64_t seed,
                               SyntheticOptions options)
    : num_classes_(num_classes), options_(std::move(options)) {
  if (num_classes_ < 2) throw ContractError("synthetic data needs C >= 2");
  if (options_.min_segments == 0 ||
      options_.min_segments > options_.max_segments) {
    throw ContractError("invalid segment count range");
  }
  if (options_.modes_per_class == 0 || options_.embedding_dim == 0) {
    throw ContractError("invalid synthetic geometry");
  }
  if (!(options_.modulated_fraction >= 0.0 &&
        options_.modulated_fraction <= 1.0)) {
    throw ContractError("modulated_fraction must lie in [0, 1]");
  }
  if (options_.cardinality_weights.empty()) {
    throw ContractError("cardinality weights must not be empty");
  }
  const std::size_t dim = options_.embedding_dim;
  const std::size_t modes = options_.modes_per_class;
  const std::size_t total = total_classes();
  const double max_cos = std::cos(options_.min_angle_deg * kPi / 180.0);
  std::mt19937_64 rng(derive_seed(seed, 0x9e0));

  // Class centres by rejection sampling, then modes jittered around them.
  // The angle constraint is enforced between every pair of modes of
  // different classes.
  prototypes_.assign(total * modes * dim, 0.0);
  for (std::size_t c = 0; c < total; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) {
        throw ContractError(
            "cannot place prototypes with the requested "
            "minimum angle");
      }
      const std::vector<double> centre =
          random_smooth_unit(dim, options_.prototype_smoothing, rng);
      for (std::size_t m = 0; m < modes; ++m) {
        std::vector<double> v =
            random_smooth_unit(dim, options_.prototype_smoothing, rng);
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          v[d] = centre[d] + options_.mode_spread * v[d];
          norm += v[d] * v[d];
        }
        norm = std::sqrt(norm);
        for (std::size_t d = 0; d < dim; ++d) {
          prototypes_[((c * modes) + m) * dim + d] = v[d] / norm;
        }
      }
      bool ok = true;
      for (std::size_t other = 0; other < c && ok; ++other) {
        for (std::size_t m = 0; m < modes && ok; ++m) {
          for (std::size_t n = 0; n < modes && ok; ++n) {
            ok = dot(prototype(c, m), prototype(other, n)) <= max_cos;
          }
        }
      }
      if (ok) break;
    }
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 mod_rng(derive_seed(seed, 0x30d));
  const auto n_mod = static_cast<std::size_t>(
      std::llround(options_.modulated_fraction * static_cast<double>(total)));
  partial_shuffle(order, n_mod, mod_rng);
  modulated_.assign(total, 0);
  for (std::size_t i = 0; i < n_mod; ++i) modulated_[order[i]] = 1;
}

std::size_t SyntheticWorld::total_classes() const {
  return num_classes_ + options_.auxiliary_classes;
}

std::span<const double> SyntheticWorld::prototype(std::size_t cls,
                                                  std::size_t mode) const {
  const std::size_t dim = options_.embedding_dim;
  return std::span<const double>(prototypes_)
      .subspan((cls * options_.modes_per_class + mode) * dim, dim);
}

Dataset SyntheticWorld::draw(std::size_t n_recordings,
                             std::size_t labelled_classes, bool pretraining,
                             std::uint64_t seed, Split split) const {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < labelled_classes; ++c) {
    names.push_back(c < num_classes_ ? "class_" + padded(c, 2)
                                     : "aux_" + padded(c - num_classes_, 2));
  }
  Dataset ds(std::move(names), split);
  const std::size_t dim = options_.embedding_dim;
  const auto& weights = options_.cardinality_weights;
  const double weight_total =
      std::accumulate(weights.begin(), weights.end(), 0.0);
  std::mt19937_64 rng(derive_seed(seed, pretraining ? 0x97e : 0xda7a));

  struct Event {
    std::size_t cls, mode, start, length, shift;
    double amplitude;
  };
  for (std::size_t r = 0; r < n_recordings; ++r) {
    // Number of labelled classes present.
    double u = canonical(rng) * weight_total;
    std::size_t k = 1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) {
        k = i + 1;
        break;
      }
      u -= weights[i];
      k = i + 1;
    }
    k = std::min(k, labelled_classes);
    std::vector<std::size_t> pool(labelled_classes);
    std::iota(pool.begin(), pool.end(), 0);
    partial_shuffle(pool, k, rng);
    std::vector<std::size_t> present(pool.begin(), pool.begin() + k);
    if (!pretraining) {
      for (std::size_t a = 0; a < options_.auxiliary_classes; ++a) {
        if (canonical(rng) < options_.auxiliary_rate) {
          present.push_back(num_classes_ + a);
        }
      }
    }

    const std::size_t n_seg =
        uniform_index(rng, options_.min_segments, options_.max_segments);
    std::vector<Event> events;
    for (const std::size_t cls : present) {
      Event e;
      e.cls = cls;
      e.mode = uniform_index(rng, 0, options_.modes_per_class - 1);
      e.amplitude =
          uniform_real(rng, options_.amplitude_min, options_.amplitude_max);
      const double coverage =
          uniform_real(rng, options_.coverage_min, options_.coverage_max);
      e.length = std::clamp<std::size_t>(
          static_cast<std::size_t>(
              std::llround(coverage * static_cast<double>(n_seg))),
          1, n_seg);
      e.start = uniform_index(rng, 0, n_seg - e.length);
      e.shift = options_.max_shift == 0
                    ? 0
                    : dim + uniform_index(rng, 0, 2 * options_.max_shift) -
                          options_.max_shift;
      events.push_back(e);
    }

    std::vector<double> background(dim, 0.0);
    if (options_.background > 0.0) {
      const std::vector<double> dir = random_unit(dim, rng);
      const double level = uniform_real(rng, 0.0, options_.background);
      for (std::size_t d = 0; d < dim; ++d) background[d] = level * dir[d];
    }
    std::vector<double> view1(n_seg * dim);
    const double sigma =
        options_.perturbation / std::sqrt(static_cast<double>(dim));
    for (std::size_t t = 0; t < n_seg; ++t) {
      double* row = view1.data() + t * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        row[d] = background[d] + sigma * standard_normal(rng);
      }
      for (const Event& e : events) {
        if (t < e.start || t >= e.start + e.length) continue;
        const auto proto = prototype(e.cls, e.mode);
        const double a = modulated(e.cls) && (t - e.start) % 2 == 1
                             ? -e.amplitude
                             : e.amplitude;
        for (std::size_t d = 0; d < dim; ++d) {
          row[(d + e.shift) % dim] += a * proto[d];
        }
      }
    }

    Recording rec;
    rec.example.id = std::string(split_name(split)) + "-" + padded(r, 6);
    rec.example.view1 = Tensor({n_seg, dim}, std::move(view1));
    rec.example.labels.assign(labelled_classes, 0);
    for (const std::size_t cls : present) {
      if (cls < labelled_classes) rec.example.labels[cls] = 1;
    }
    rec.annotation = NoiseAnnotation{
        rec.example.labels,
        std::vector<NoiseFlag>(labelled_classes, NoiseFlag::kClean)};
    ds.add(std::move(rec));
  }
  return ds;
}

Dataset SyntheticWorld::generate(std::size_t n_recordings,
                                 const NoiseModel& noise, std::uint64_t seed,
                                 Split split) const {
  noise.validate(num_classes_);
  if (n_recordings < num_classes_) {
    throw ContractError("need at least C recordings");
  }
  Dataset clean = draw(n_recordings, num_classes_, false, seed, split);

  // Retrieval noise: for every class, pull enough recordings that lack it
  // into its positive set that fp_rate of the observed positives are
  // spurious.
  std::vector<Recording> recs(clean.recordings().begin(),
                              clean.recordings().end());
  std::mt19937_64 rng(derive_seed(seed, 0xf00));
  for (std::size_t c = 0; c < num_classes_; ++c) {
    std::vector<std::size_t> negatives;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].annotation->true_labels[c]) {
        ++positives;
      } else {
        negatives.push_back(i);
      }
    }
    const double rate = noise.fp_rate[c];
    const std::size_t wanted = static_cast<std::size_t>(
        std::llround(rate / (1.0 - rate) * static_cast<double>(positives)));
    const std::size_t k = std::min(wanted, negatives.size());
    partial_shuffle(negatives, k, rng);
    for (std::size_t j = 0; j < k; ++j) {
      Recording& rec = recs[negatives[j]];
      rec.example.labels[c] = 1;
      rec.annotation->flags[c] = NoiseFlag::kFalsePositive;
    }
  }
  Dataset out(clean.class_names(), split);
  for (Recording& r : recs) out.add(std::move(r));
  return out;
}

Dataset SyntheticWorld::generate_pretraining(std::size_t n_recordings,
                                             std::uint64_t seed) const {
  return draw(n_recordings, total_classes(), true, seed, Split::kPretrain);
}

Dataset generate_synthetic(std::size_t n_recordings, std::size_t num_classes,
                           const NoiseModel& noise, std::uint64_t seed) {
  return SyntheticWorld(num_classes, seed).generate(n_recordings, noise, seed);
}

Dataset build_view2(N1Network& pretrained, const Dataset& ds) {
  const Mode previous = pretrained.mode();
  pretrained.set_mode(Mode::kEval);
  Dataset out(ds.class_names(), ds.split());
  try {
    for (const Recording& r : ds.recordings()) {
      Recording copy = r;
      copy.example.view2 = pretrained.extract_f2(r.example.view1);
      out.add(std::move(copy));
    }
  } catch (...) {
    pretrained.set_mode(previous);
    throw;
  }
  pretrained.set_mode(previous);
  return out;
}

}  // namespace weblynet
