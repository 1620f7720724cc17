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

#ifndef IQLAB_PIPELINE_HPP_
#define IQLAB_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iqlab/corpus.hpp"
#include "iqlab/ingest.hpp"
#include "iqlab/metrics.hpp"
#include "iqlab/ranker.hpp"
#include "iqlab/synth.hpp"

namespace iqlab {

struct SynthConfig {
  LatentSpec latent;
  std::vector<WarpSpec> warps;
};

struct SplitConfig {
  double train_fraction = 0.8;
  std::optional<int> by_reference;  // reference-grouped split when set
};

struct CorpusConfig {
  int pairs_per_record = 10;  // relativity pairs per train record
  bool include_attribute_pairs = false;
};

enum class BenchmarkMode { kNone, kStrategies, kMatrix };

struct TrainConfig {
  BenchmarkMode benchmark = BenchmarkMode::kStrategies;
  int hidden_size = 16;
  int anchor_index = 0;
  TrainDefaults defaults;
  // Explicit plan, used when benchmark == kNone.
  std::vector<StageSpec> stages;
  std::string anchor_dataset;
};

struct EvalConfig {
  std::vector<std::string> targets;  // dataset names; empty = all
  int test_pairs = 200;
};

/// One run configuration file drives every command. Exactly one of
/// {synth, manifests} must be set.
struct RunConfig {
  std::uint64_t seed = 42;
  int jobs = 1;
  std::filesystem::path out_dir = "out";
  std::optional<SynthConfig> synth;
  std::vector<std::filesystem::path> manifests;
  SplitConfig split;
  CorpusConfig corpus;
  TrainConfig train;
  EvalConfig eval;
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Shared machinery

using FeatureTable =
    std::map<std::string, std::map<std::string, FeatureVector>>;

struct PreparedData {
  std::vector<DatasetManifest> datasets;
  /// Image paths in datasets[i] resolve against base_dirs[i].
  std::vector<std::filesystem::path> base_dirs;
};

/// Loads, normalizes and splits every dataset the config names (normalized
/// artifacts from a prior `ingest` run are picked up when present). Split
/// seeds derive from (config seed, dataset name) so train and eval agree.
/// Manifests that already carry splits keep them.
PreparedData prepare_datasets(const RunConfig& config);

FeatureTable features_from_disk(const PreparedData& data, int jobs);
FeatureTable features_from_suite(const std::vector<SyntheticDataset>& suite,
                                 int jobs);

/// Relativity / quantitative / authenticity pools over the train splits.
TrainingPools build_pools(const std::vector<DatasetManifest>& datasets,
                          const FeatureTable& features,
                          const CorpusConfig& corpus, std::uint64_t seed);

/// Test-split metrics for one scorer on one dataset: SRCC/PLCC of predicted
/// scores against normalized ratings, plus ranking-head and score-difference
/// pair accuracies and authenticity accuracy where labels exist.
DatasetMetrics evaluate_on_dataset(const ModelParams& params,
                                   const DatasetManifest& dataset,
                                   const FeatureTable& features,
                                   int test_pairs, std::uint64_t seed);

/// Cross-dataset mean of per-dataset SRCC.
double average_srcc(const std::map<std::string, DatasetMetrics>& per_dataset);

struct StrategyOutcome {
  std::string name;
  std::map<std::string, DatasetMetrics> per_dataset;
  double avg_srcc = 0.0;
};

struct ExperimentResult {
  std::vector<std::string> datasets;
  std::vector<StrategyOutcome> strategies;
  std::vector<StrategyOutcome> matrix;
};

/// In-memory end-to-end run of the inconformity benchmark: generate the
/// suite, build pools, train the requested plans, evaluate on held-out
/// splits. The CLI commands persist the same stages to disk.
ExperimentResult run_inconformity_experiment(const RunConfig& config,
                                             bool include_strategies,
                                             bool include_matrix);

// ---------------------------------------------------------------------------
// Commands (shared by the CLI binary and tests)

void cmd_synth(const RunConfig& config);
void cmd_ingest(const RunConfig& config, bool use_empirical_range = false);
void cmd_build_corpus(const RunConfig& config);
void cmd_indicators(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config,
              const std::optional<std::filesystem::path>& responses =
                  std::nullopt);
void cmd_report(const RunConfig& config,
                const std::optional<std::filesystem::path>& preferences =
                    std::nullopt);

}  // namespace iqlab

#endif  // IQLAB_PIPELINE_HPP_
