// Copyright (c) the iqlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IQLAB_INGEST_HPP_
#define IQLAB_INGEST_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iqlab {

/// Rating targets: the mean opinion score plus the five attribute
/// indicators a dataset may annotate.
enum class Metric {
  kMos,
  kBrightness,
  kColorfulness,
  kContrast,
  kNoisiness,
  kSharpness,
};

const char* metric_name(Metric m);            // "quality" for kMos
const char* metric_key(Metric m);             // "mos" for kMos
std::optional<Metric> parse_metric_key(std::string_view key);
std::vector<Metric> attribute_metrics();      // all but kMos, canonical order

/// Nominal rating range declared by a dataset. min < max, both finite.
struct ScoreRange {
  double min = 0.0;
  double max = 0.0;
};

enum class Split { kUnassigned, kTrain, kTest };

struct AnnotatedImage {
  std::string id;
  std::string dataset_id;
  std::string image_path;
  double mos_raw = 0.0;
  std::optional<double> mos;                 // [0,100], set by normalize_scores
  std::map<Metric, double> attributes_raw;   // native units as annotated
  std::map<Metric, double> attributes;       // [0,100], set by normalize_scores
  std::optional<bool> authentic;             // true = photographic
  std::optional<std::string> reference_id;   // pristine source image
  Split split = Split::kUnassigned;
};

enum class DatasetKind {
  kPhotographicWild,
  kPhotographicArtificial,
  kAiGenerated,
};

const char* dataset_kind_name(DatasetKind k);

struct DatasetManifest {
  std::string name;
  DatasetKind kind = DatasetKind::kPhotographicWild;
  ScoreRange score_range;
  std::map<Metric, ScoreRange> attribute_ranges;
  std::vector<AnnotatedImage> records;

  bool normalized() const;
  std::size_t train_count() const;
  std::size_t test_count() const;
  const AnnotatedImage* find(std::string_view id) const;
};

/// Parses and validates a manifest file. Errors carry the offending line
/// number; range violations and duplicate ids name the record.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& text,
                               const std::string& origin);

std::string serialize_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m,
                   const std::filesystem::path& path);

/// Linear rescaling of mos_raw (and attributes with declared ranges) to
/// [0,100]. Attributes without a declared range must already lie in [0,100]
/// and pass through unchanged. With use_empirical_range the observed
/// min/max of mos_raw replaces the declared range.
DatasetManifest normalize_scores(DatasetManifest m,
                                 bool use_empirical_range = false);

/// Assigns train/test with train count = round(train_fraction * N), as a
/// deterministic function of (seed, sorted record ids): permuting the file
/// order never changes any assignment.
DatasetManifest split_random(DatasetManifest m, double train_fraction,
                             std::uint64_t seed);

/// Reference-grouped split: records sharing a reference_id always land in
/// the same split; exactly train_reference_count groups go to train.
DatasetManifest split_by_reference(DatasetManifest m,
                                   int train_reference_count,
                                   std::uint64_t seed);

}  // namespace iqlab

#endif  // IQLAB_INGEST_HPP_
