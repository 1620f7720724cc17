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

#ifndef IQLAB_CORPUS_HPP_
#define IQLAB_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "iqlab/ingest.hpp"
#include "iqlab/task.hpp"

namespace iqlab {

struct ImageRef {
  std::string dataset_id;
  std::string id;
  std::string path;
};

/// One sampled comparison: label kFirst iff the target metric of `a`
/// strictly exceeds that of `b`. Equal-valued pairs are never emitted.
struct RelativityPair {
  ImageRef a;
  ImageRef b;
  PairWinner winner = PairWinner::kFirst;
  Metric target_metric = Metric::kMos;
};

/// Band labels backing a qualitative answer: (metric name, band) pairs,
/// "overall" first.
struct QualBands {
  std::vector<std::pair<std::string, std::string>> entries;
  bool operator==(const QualBands&) const = default;
};

/// Machine-readable target behind the answer text. monostate when the
/// sample was parsed back from text (the sidecar carries the target).
using GroundTruth =
    std::variant<std::monostate, double, PairWinner, bool, QualBands>;

struct DialogueSample {
  TaskId task = TaskId::kQuant;
  std::vector<std::string> images;  // 1 slot, or 2 for relativity
  std::string instruction;
  std::string answer;
  GroundTruth truth;

  /// Equality of the serialized content (truth lives in the sidecar).
  bool same_text(const DialogueSample& o) const {
    return task == o.task && images == o.images &&
           instruction == o.instruction && answer == o.answer;
  }
};

/// Dialogue plus the provenance the evaluation harness needs.
struct CorpusEntry {
  DialogueSample sample;
  std::string dataset_id;
  std::vector<std::string> image_ids;
};

/// Five-level opinion band for a [0,100] rating.
/// [0,20) bad, [20,40) poor, [40,60) fair, [60,80) good, [80,100] excellent.
const char* quality_band(double value);

// ---------------------------------------------------------------------------
// Construction

/// Samples `count` ordered pairs of distinct train-split images with
/// strictly different metric values. Deterministic under (seed, id set):
/// record order in the manifest is irrelevant.
std::vector<RelativityPair> build_relativity_pairs(const DatasetManifest& m,
                                                   int count, Metric metric,
                                                   std::uint64_t seed);

CorpusEntry relativity_dialogue(const RelativityPair& pair,
                                const DatasetManifest& m);

std::vector<CorpusEntry> build_quantitative_samples(const DatasetManifest& m,
                                                    Metric metric);

std::vector<CorpusEntry> build_qualitative_samples(const DatasetManifest& m);

std::vector<CorpusEntry> build_authenticity_samples(const DatasetManifest& m);

// ---------------------------------------------------------------------------
// Serialization

/// Emits the unified dialogue format, byte-exact:
///   Human: <img1>{slot1}</img1>[<img2>{slot2}</img2>]{task token}{instruction}
///   Assistant: {answer}
/// with a single trailing newline.
std::string serialize_dialogue(const DialogueSample& s);

/// Exact inverse of serialize_dialogue. Grammar violations raise ParseError
/// with the byte offset of the failure. truth is left unset.
DialogueSample parse_dialogue(const std::string& text);

/// Corpus file: one serialized dialogue per record, blank-line separated.
/// All entries must share one task. The sidecar (JSON lines) maps sample
/// index -> (dataset_id, image ids, ground truth).
void write_corpus(const std::vector<CorpusEntry>& entries,
                  const std::filesystem::path& corpus_path,
                  const std::filesystem::path& sidecar_path);

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& corpus_path,
                                     const std::filesystem::path& sidecar_path);

// ---------------------------------------------------------------------------
// Response scoring

/// Extracts a score in [0,100] from free-form text: the first in-range
/// numeric literal after a cue word ("score", "rate", "rating", "quality"),
/// else the first in-range literal anywhere. nullopt when no score parses;
/// callers count those rather than imputing.
std::optional<double> parse_score_from_response(std::string_view text);

}  // namespace iqlab

#endif  // IQLAB_CORPUS_HPP_
