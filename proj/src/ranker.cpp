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

#include "iqlab/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "iqlab/error.hpp"
#include "iqlab/rng.hpp"
#include "iqlab/util.hpp"

namespace iqlab {

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct Forward {
  std::vector<double> h;  // tanh activations
};

Forward forward_hidden(const ModelParams& p, const FeatureVector& f) {
  Forward fw;
  fw.h.resize(static_cast<std::size_t>(p.hidden));
  for (int j = 0; j < p.hidden; ++j) {
    double z = p.b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < kFeatureCount; ++i) {
      z += p.w1[static_cast<std::size_t>(i) * p.hidden + j] *
           f[static_cast<std::size_t>(i)];
    }
    fw.h[static_cast<std::size_t>(j)] = std::tanh(z);
  }
  return fw;
}

/// Accumulates d(loss)/d(score logit) = dl_du through one branch of the
/// network into `grad`.
void backprop_score(const ModelParams& p, const FeatureVector& f,
                    const Forward& fw, double dl_du, ModelParams& grad) {
  for (int j = 0; j < p.hidden; ++j) {
    const double h = fw.h[static_cast<std::size_t>(j)];
    grad.w_score[static_cast<std::size_t>(j)] += dl_du * h;
    const double dz = dl_du * p.w_score[static_cast<std::size_t>(j)] *
                      (1.0 - h * h);
    grad.b1[static_cast<std::size_t>(j)] += dz;
    for (int i = 0; i < kFeatureCount; ++i) {
      grad.w1[static_cast<std::size_t>(i) * p.hidden + j] +=
          dz * f[static_cast<std::size_t>(i)];
    }
  }
  grad.b_score += dl_du;
}

void backprop_auth(const ModelParams& p, const FeatureVector& f,
                   const Forward& fw, double dl_dv, ModelParams& grad) {
  for (int j = 0; j < p.hidden; ++j) {
    const double h = fw.h[static_cast<std::size_t>(j)];
    grad.w_auth[static_cast<std::size_t>(j)] += dl_dv * h;
    const double dz = dl_dv * p.w_auth[static_cast<std::size_t>(j)] *
                      (1.0 - h * h);
    grad.b1[static_cast<std::size_t>(j)] += dz;
    for (int i = 0; i < kFeatureCount; ++i) {
      grad.w1[static_cast<std::size_t>(i) * p.hidden + j] +=
          dz * f[static_cast<std::size_t>(i)];
    }
  }
  grad.b_auth += dl_dv;
}

void axpy(ModelParams& acc, const ModelParams& g, double scale) {
  auto add = [scale](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  };
  add(acc.w1, g.w1);
  add(acc.b1, g.b1);
  add(acc.w_score, g.w_score);
  add(acc.w_auth, g.w_auth);
  acc.b_score += scale * g.b_score;
  acc.b_auth += scale * g.b_auth;
}

std::vector<TaskId> sorted_tasks(const std::set<TaskId>& tasks) {
  std::vector<TaskId> out(tasks.begin(), tasks.end());
  std::sort(out.begin(), out.end());
  return out;
}

int stage_rank(StageId s) {
  switch (s) {
    case StageId::kRelativity: return 0;
    case StageId::kMultifunctional: return 1;
    case StageId::kRefinement: return 2;
  }
  return 0;
}

void validate_spec(const StageSpec& spec) {
  if (spec.steps < 1) {
    throw ValidationError("stage spec: steps must be >= 1");
  }
  if (spec.batch_size < 1) {
    throw ValidationError("stage spec: batch_size must be >= 1");
  }
  // Zero is admitted so a no-op stage can exercise the plumbing.
  if (!(spec.learning_rate >= 0.0) || !std::isfinite(spec.learning_rate)) {
    throw ValidationError("stage spec: learning_rate must be finite and >= 0");
  }
  if (spec.tasks.empty()) {
    throw ValidationError("stage spec: tasks must be nonempty");
  }
  if (spec.tasks.count(TaskId::kDescribe)) {
    throw ValidationError(
        "stage spec: the describe task has no trainable objective on this "
        "scorer");
  }
}

}  // namespace

std::size_t ModelParams::param_count() const {
  return w1.size() + b1.size() + w_score.size() + w_auth.size() + 2;
}

bool ModelParams::all_finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
  };
  return ok(w1) && ok(b1) && ok(w_score) && ok(w_auth) &&
         std::isfinite(b_score) && std::isfinite(b_auth);
}

ModelParams ModelParams::zeros_like(const ModelParams& shape) {
  ModelParams p;
  p.hidden = shape.hidden;
  p.w1.assign(shape.w1.size(), 0.0);
  p.b1.assign(shape.b1.size(), 0.0);
  p.w_score.assign(shape.w_score.size(), 0.0);
  p.w_auth.assign(shape.w_auth.size(), 0.0);
  return p;
}

std::vector<double*> param_ptrs(ModelParams& p) {
  std::vector<double*> out;
  out.reserve(p.param_count());
  for (auto& v : p.w1) out.push_back(&v);
  for (auto& v : p.b1) out.push_back(&v);
  for (auto& v : p.w_score) out.push_back(&v);
  out.push_back(&p.b_score);
  for (auto& v : p.w_auth) out.push_back(&v);
  out.push_back(&p.b_auth);
  return out;
}

ModelParams init_params(int hidden_size, std::uint64_t seed) {
  if (hidden_size < 1) {
    throw ValidationError("init_params: hidden_size must be >= 1");
  }
  ModelParams p;
  p.hidden = hidden_size;
  p.w1.resize(static_cast<std::size_t>(kFeatureCount) * hidden_size);
  p.b1.assign(static_cast<std::size_t>(hidden_size), 0.0);
  p.w_score.resize(static_cast<std::size_t>(hidden_size));
  p.w_auth.resize(static_cast<std::size_t>(hidden_size));

  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / (kFeatureCount + hidden_size));
  for (auto& w : p.w1) w = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / (hidden_size + 1));
  for (auto& w : p.w_score) w = rng.uniform(-a2, a2);
  for (auto& w : p.w_auth) w = rng.uniform(-a2, a2);
  return p;
}

double score_logit(const ModelParams& p, const FeatureVector& f) {
  const Forward fw = forward_hidden(p, f);
  double u = p.b_score;
  for (int j = 0; j < p.hidden; ++j) {
    u += p.w_score[static_cast<std::size_t>(j)] *
         fw.h[static_cast<std::size_t>(j)];
  }
  return u;
}

double score(const ModelParams& p, const FeatureVector& f) {
  return 100.0 * sigmoid(score_logit(p, f));
}

double predict_authenticity(const ModelParams& p, const FeatureVector& f) {
  const Forward fw = forward_hidden(p, f);
  double v = p.b_auth;
  for (int j = 0; j < p.hidden; ++j) {
    v += p.w_auth[static_cast<std::size_t>(j)] *
         fw.h[static_cast<std::size_t>(j)];
  }
  return sigmoid(v);
}

PairWinner predict_pair(const ModelParams& p, const FeatureVector& f_a,
                        const FeatureVector& f_b, std::string_view id_a,
                        std::string_view id_b) {
  const double u_a = score_logit(p, f_a);
  const double u_b = score_logit(p, f_b);
  if (u_a > u_b) return PairWinner::kFirst;
  if (u_b > u_a) return PairWinner::kSecond;
  return id_a <= id_b ? PairWinner::kFirst : PairWinner::kSecond;
}

LossGrad pairwise_loss_grad(const ModelParams& p, const FeatureVector& f_a,
                            const FeatureVector& f_b, PairWinner winner) {
  const Forward fw_a = forward_hidden(p, f_a);
  const Forward fw_b = forward_hidden(p, f_b);
  double u_a = p.b_score, u_b = p.b_score;
  for (int j = 0; j < p.hidden; ++j) {
    u_a += p.w_score[static_cast<std::size_t>(j)] *
           fw_a.h[static_cast<std::size_t>(j)];
    u_b += p.w_score[static_cast<std::size_t>(j)] *
           fw_b.h[static_cast<std::size_t>(j)];
  }
  const double delta = u_a - u_b;

  LossGrad out;
  out.grad = ModelParams::zeros_like(p);
  double dl_ddelta;
  if (winner == PairWinner::kFirst) {
    out.loss = softplus(-delta);         // -log sigmoid(delta)
    dl_ddelta = sigmoid(delta) - 1.0;
  } else {
    out.loss = softplus(delta);          // -log sigmoid(-delta)
    dl_ddelta = sigmoid(delta);
  }
  backprop_score(p, f_a, fw_a, dl_ddelta, out.grad);
  backprop_score(p, f_b, fw_b, -dl_ddelta, out.grad);
  return out;
}

LossGrad absolute_loss_grad(const ModelParams& p, const FeatureVector& f,
                            double target_mos) {
  if (!(target_mos >= 0.0 && target_mos <= 100.0)) {
    throw ValidationError("absolute_loss_grad: target " +
                          double_to_string(target_mos) +
                          " outside [0,100]");
  }
  const Forward fw = forward_hidden(p, f);
  double u = p.b_score;
  for (int j = 0; j < p.hidden; ++j) {
    u += p.w_score[static_cast<std::size_t>(j)] *
         fw.h[static_cast<std::size_t>(j)];
  }
  const double prob = sigmoid(u);
  const double t = target_mos / 100.0;
  const double resid = prob - t;

  LossGrad out;
  out.loss = resid * resid;
  out.grad = ModelParams::zeros_like(p);
  const double dl_du = 2.0 * resid * prob * (1.0 - prob);
  backprop_score(p, f, fw, dl_du, out.grad);
  return out;
}

LossGrad authenticity_loss_grad(const ModelParams& p, const FeatureVector& f,
                                bool photographic) {
  const Forward fw = forward_hidden(p, f);
  double v = p.b_auth;
  for (int j = 0; j < p.hidden; ++j) {
    v += p.w_auth[static_cast<std::size_t>(j)] *
         fw.h[static_cast<std::size_t>(j)];
  }
  const double y = photographic ? 1.0 : 0.0;

  LossGrad out;
  out.loss = softplus(v) - y * v;  // BCE on sigmoid(v), stable form
  out.grad = ModelParams::zeros_like(p);
  const double dl_dv = sigmoid(v) - y;
  backprop_auth(p, f, fw, dl_dv, out.grad);
  return out;
}

const char* stage_name(StageId s) {
  switch (s) {
    case StageId::kRelativity: return "relativity";
    case StageId::kMultifunctional: return "multifunctional";
    case StageId::kRefinement: return "refinement";
  }
  return "relativity";
}

const std::vector<std::string>& StageSpec::datasets_for(TaskId t) const {
  const auto it = task_datasets.find(t);
  return it != task_datasets.end() ? it->second : dataset_ids;
}

Batch sample_batch(const TrainingPools& pools, const StageSpec& spec,
                   int step) {
  validate_spec(spec);
  const std::vector<TaskId> tasks = sorted_tasks(spec.tasks);
  const std::size_t offset =
      static_cast<std::size_t>(splitmix64(spec.seed) % tasks.size());
  const TaskId task =
      tasks[(static_cast<std::size_t>(step) + offset) % tasks.size()];

  Batch batch;
  batch.task = task;
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(step)));

  auto draw = [&](const auto& by_dataset, auto& items) {
    using ItemT = typename std::decay_t<decltype(items)>::value_type;
    std::vector<const ItemT*> flat;
    for (const std::string& d : spec.datasets_for(task)) {
      const auto it = by_dataset.find(d);
      if (it == by_dataset.end() || it->second.empty()) {
        throw ValidationError(std::string("sample_batch: empty ") +
                              task_name(task) + " pool for dataset '" + d +
                              "'");
      }
      for (const auto& item : it->second) flat.push_back(&item);
    }
    if (flat.empty()) {
      throw ValidationError(std::string("sample_batch: no datasets bound to "
                                        "task ") + task_name(task));
    }
    items.reserve(static_cast<std::size_t>(spec.batch_size));
    for (int k = 0; k < spec.batch_size; ++k) {
      items.push_back(*flat[static_cast<std::size_t>(
          rng.uniform_int(flat.size()))]);
    }
  };

  switch (task) {
    case TaskId::kRelativity: draw(pools.pairs, batch.pairs); break;
    case TaskId::kQuant: draw(pools.scores, batch.scores); break;
    case TaskId::kAuthenticity: draw(pools.auths, batch.auths); break;
    case TaskId::kDescribe:
      throw ValidationError("sample_batch: describe task is not trainable");
  }
  return batch;
}

StageResult train_stage(ModelParams params, const StageSpec& spec,
                        const TrainingPools& pools) {
  validate_spec(spec);
  StageResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(spec.steps));

  for (int step = 0; step < spec.steps; ++step) {
    const Batch batch = sample_batch(pools, spec, step);
    ModelParams grad = ModelParams::zeros_like(params);
    double loss_sum = 0.0;
    std::size_t n = 0;

    for (const auto& item : batch.pairs) {
      const LossGrad lg = pairwise_loss_grad(params, item.a, item.b,
                                             item.winner);
      loss_sum += lg.loss;
      axpy(grad, lg.grad, 1.0);
      ++n;
    }
    for (const auto& item : batch.scores) {
      const LossGrad lg = absolute_loss_grad(params, item.f, item.target);
      loss_sum += lg.loss;
      axpy(grad, lg.grad, 1.0);
      ++n;
    }
    for (const auto& item : batch.auths) {
      const LossGrad lg =
          authenticity_loss_grad(params, item.f, item.photographic);
      loss_sum += lg.loss;
      axpy(grad, lg.grad, 1.0);
      ++n;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    axpy(params, grad, -spec.learning_rate * inv_n);
    result.loss_trace.push_back(loss_sum * inv_n);

    if (!params.all_finite()) {
      throw TrainingDivergedError(
          std::string("non-finite parameter during ") +
              stage_name(spec.stage) + " stage",
          step);
    }
  }
  result.params = std::move(params);
  return result;
}

TrainingPools curate_pools(const TrainingPools& pools, const ModelParams& p,
                           double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ValidationError("curate_pools: keep_fraction must lie in (0,1]");
  }
  auto keep_count = [keep_fraction](std::size_t n) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(keep_fraction * static_cast<double>(n))));
  };
  auto select = [&](const auto& items, const auto& loss_of) {
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> losses(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      losses[i] = loss_of(items[i]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return losses[a] < losses[b];
                     });
    std::decay_t<decltype(items)> kept;
    const std::size_t n = keep_count(items.size());
    kept.reserve(n);
    for (std::size_t i = 0; i < n; ++i) kept.push_back(items[order[i]]);
    return kept;
  };

  TrainingPools out;
  for (const auto& [dataset, items] : pools.pairs) {
    out.pairs[dataset] = select(items, [&](const PairItem& it) {
      return pairwise_loss_grad(p, it.a, it.b, it.winner).loss;
    });
  }
  for (const auto& [dataset, items] : pools.scores) {
    out.scores[dataset] = select(items, [&](const ScalarItem& it) {
      return absolute_loss_grad(p, it.f, it.target).loss;
    });
  }
  for (const auto& [dataset, items] : pools.auths) {
    out.auths[dataset] = select(items, [&](const AuthItem& it) {
      return authenticity_loss_grad(p, it.f, it.photographic).loss;
    });
  }
  return out;
}

ModelParams run_curriculum(ModelParams params, const CurriculumPlan& plan,
                           const TrainingPools& pools,
                           const StageCallback& on_stage) {
  if (plan.stages.empty()) {
    throw ValidationError("curriculum plan has no stages");
  }
  for (std::size_t i = 0; i + 1 < plan.stages.size(); ++i) {
    if (stage_rank(plan.stages[i].stage) >=
        stage_rank(plan.stages[i + 1].stage)) {
      throw ValidationError(
          std::string("curriculum stages out of order: ") +
          stage_name(plan.stages[i].stage) + " must precede " +
          stage_name(plan.stages[i + 1].stage));
    }
  }
  if (!plan.anchor_dataset.empty()) {
    for (const StageSpec& spec : plan.stages) {
      if (spec.stage != StageId::kMultifunctional) continue;
      bool found = false;
      for (const TaskId t : spec.tasks) {
        const auto& ds = spec.datasets_for(t);
        found = found || std::find(ds.begin(), ds.end(),
                                   plan.anchor_dataset) != ds.end();
      }
      if (!found) {
        throw ValidationError("anchor dataset '" + plan.anchor_dataset +
                              "' is not used by the multifunctional stage");
      }
    }
  }

  for (const StageSpec& spec : plan.stages) {
    StageResult result;
    if (spec.stage == StageId::kRefinement) {
      const TrainingPools curated = curate_pools(pools, params, 0.5);
      result = train_stage(std::move(params), spec, curated);
    } else {
      result = train_stage(std::move(params), spec, pools);
    }
    params = std::move(result.params);
    if (on_stage) {
      result.params = params;
      on_stage(spec, result);
    }
  }
  return params;
}

std::string serialize_checkpoint(const ModelParams& p,
                                 const std::string& provenance,
                                 std::uint64_t seed) {
  std::ostringstream out;
  out << "iqlab-checkpoint v1\n";
  out << "hidden " << p.hidden << "\n";
  out << "provenance " << (provenance.empty() ? "none" : provenance) << "\n";
  out << "seed " << seed << "\n";
  ModelParams copy = p;
  const auto ptrs = param_ptrs(copy);
  out << "params " << ptrs.size() << "\n";
  for (const double* v : ptrs) out << double_to_string(*v) << "\n";
  return out.str();
}

void save_checkpoint(const ModelParams& p, const std::string& provenance,
                     std::uint64_t seed, const std::filesystem::path& path) {
  atomic_write_file(path, serialize_checkpoint(p, provenance, seed));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::string> lines = split_lines(read_file(path));
  if (lines.size() < 5 || lines[0] != "iqlab-checkpoint v1") {
    throw ValidationError("not an iqlab checkpoint: " + path.string());
  }
  auto field = [&](std::size_t i, const std::string& key) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.size() != 2 || tokens[0] != key) {
      throw ValidationError("checkpoint " + path.string() +
                            ": expected '" + key + "' on line " +
                            std::to_string(i + 1));
    }
    return std::string(tokens[1]);
  };

  Checkpoint ck;
  const int hidden =
      static_cast<int>(parse_int(field(1, "hidden"), "hidden size"));
  ck.provenance = field(2, "provenance");
  ck.seed = static_cast<std::uint64_t>(
      parse_int(field(3, "seed"), "checkpoint seed"));
  const long long count = parse_int(field(4, "params"), "param count");

  ck.params = init_params(hidden, 0);
  const auto ptrs = param_ptrs(ck.params);
  if (static_cast<long long>(ptrs.size()) != count ||
      lines.size() < 5 + ptrs.size()) {
    throw ValidationError("checkpoint " + path.string() +
                          ": parameter count mismatch");
  }
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    *ptrs[i] = parse_double(lines[5 + i], "checkpoint parameter");
  }
  return ck;
}

}  // namespace iqlab
