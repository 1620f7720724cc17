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

#ifndef IQLAB_RANKER_HPP_
#define IQLAB_RANKER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "iqlab/indicators.hpp"
#include "iqlab/task.hpp"

namespace iqlab {

/// One-hidden-layer scorer with two heads:
///   h = tanh(W1^T f + b1)
///   score = 100 * sigmoid(w_score . h + b_score)
///   p(photographic) = sigmoid(w_auth . h + b_auth)
struct ModelParams {
  int hidden = 16;
  std::vector<double> w1;       // kFeatureCount x hidden, input-major
  std::vector<double> b1;       // hidden
  std::vector<double> w_score;  // hidden
  double b_score = 0.0;
  std::vector<double> w_auth;   // hidden
  double b_auth = 0.0;

  std::size_t param_count() const;
  bool all_finite() const;
  static ModelParams zeros_like(const ModelParams& shape);
};

/// Pointers to every parameter in declared order. The same order backs
/// checkpoints and finite-difference sweeps.
std::vector<double*> param_ptrs(ModelParams& p);

/// Xavier-uniform init: weights from uniform(-a, a) with
/// a = sqrt(6/(fan_in+fan_out)); biases zero. Deterministic under seed.
ModelParams init_params(int hidden_size, std::uint64_t seed);

/// Pre-sigmoid score logit. rank-pair decisions compare these directly.
double score_logit(const ModelParams& p, const FeatureVector& f);

/// Absolute score in (0,100).
double score(const ModelParams& p, const FeatureVector& f);

/// Probability that the image is photographic.
double predict_authenticity(const ModelParams& p, const FeatureVector& f);

/// Logit comparison with a deterministic tie-break: on exact equality the
/// lexicographically smaller id wins.
PairWinner predict_pair(const ModelParams& p, const FeatureVector& f_a,
                        const FeatureVector& f_b, std::string_view id_a,
                        std::string_view id_b);

struct LossGrad {
  double loss = 0.0;
  ModelParams grad;
};

/// Bradley-Terry pairwise logistic loss on pre-sigmoid logits:
/// -log sigmoid(u_a - u_b) for label [1,0], symmetric otherwise.
LossGrad pairwise_loss_grad(const ModelParams& p, const FeatureVector& f_a,
                            const FeatureVector& f_b, PairWinner winner);

/// Squared error on the sigmoid scale: ((score - target)/100)^2.
LossGrad absolute_loss_grad(const ModelParams& p, const FeatureVector& f,
                            double target_mos);

/// Binary cross-entropy on the authenticity head; y_auth=1 = photographic.
LossGrad authenticity_loss_grad(const ModelParams& p, const FeatureVector& f,
                                bool photographic);

// ---------------------------------------------------------------------------
// Curriculum

struct PairItem {
  FeatureVector a{};
  FeatureVector b{};
  PairWinner winner = PairWinner::kFirst;
};

struct ScalarItem {
  FeatureVector f{};
  double target = 0.0;  // [0,100]
};

struct AuthItem {
  FeatureVector f{};
  bool photographic = false;
};

/// Task-keyed, dataset-keyed training items.
struct TrainingPools {
  std::map<std::string, std::vector<PairItem>> pairs;
  std::map<std::string, std::vector<ScalarItem>> scores;
  std::map<std::string, std::vector<AuthItem>> auths;
};

enum class StageId { kRelativity, kMultifunctional, kRefinement };

const char* stage_name(StageId s);

struct StageSpec {
  StageId stage = StageId::kRelativity;
  std::set<TaskId> tasks;
  std::vector<std::string> dataset_ids;
  /// Per-task dataset override; tasks not listed fall back to dataset_ids.
  /// Mirrors the per-purpose dataset bindings of the staged recipe.
  std::map<TaskId, std::vector<std::string>> task_datasets;
  int steps = 1;
  int batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  const std::vector<std::string>& datasets_for(TaskId t) const;
};

struct CurriculumPlan {
  std::vector<StageSpec> stages;
  std::string anchor_dataset;
};

/// Single-task batch: exactly one of the item vectors is populated.
struct Batch {
  TaskId task = TaskId::kQuant;
  std::vector<PairItem> pairs;
  std::vector<ScalarItem> scores;
  std::vector<AuthItem> auths;
};

/// Deterministic function of (spec.seed, step): task by seeded rotation over
/// the spec's tasks, items drawn with replacement from that task's pool.
Batch sample_batch(const TrainingPools& pools, const StageSpec& spec,
                   int step);

struct StageResult {
  ModelParams params;
  std::vector<double> loss_trace;  // mean batch loss per step
};

/// Plain gradient descent, per-batch mean gradient, fixed learning rate.
/// Throws TrainingDivergedError (with the step index) if any parameter goes
/// non-finite.
StageResult train_stage(ModelParams params, const StageSpec& spec,
                        const TrainingPools& pools);

/// Validates the plan (stage order relativity < multifunctional <
/// refinement, each at most once; anchor listed in the multifunctional
/// stage when set) and threads parameters through the stages. The
/// refinement stage trains on the lowest-loss half of each pool under the
/// incoming parameters, the desk-scale version of hand-picking high-quality
/// samples. `on_stage` (optional) observes each finished stage.
using StageCallback =
    std::function<void(const StageSpec&, const StageResult&)>;

ModelParams run_curriculum(ModelParams params, const CurriculumPlan& plan,
                           const TrainingPools& pools,
                           const StageCallback& on_stage = nullptr);

/// Keeps the `keep_fraction` of each pool with the smallest per-item loss.
TrainingPools curate_pools(const TrainingPools& pools, const ModelParams& p,
                           double keep_fraction);

// ---------------------------------------------------------------------------
// Checkpoints

std::string serialize_checkpoint(const ModelParams& p,
                                 const std::string& provenance,
                                 std::uint64_t seed);
void save_checkpoint(const ModelParams& p, const std::string& provenance,
                     std::uint64_t seed, const std::filesystem::path& path);

struct Checkpoint {
  ModelParams params;
  std::string provenance;
  std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace iqlab

#endif  // IQLAB_RANKER_HPP_
