#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "iqlab/error.hpp"
#include "iqlab/ranker.hpp"
#include "iqlab/rng.hpp"

using namespace iqlab;

namespace {

FeatureVector random_features(Rng& rng) {
  FeatureVector f{};
  for (auto& v : f) v = rng.uniform(0.0, 1.0);
  f[11] = 1.0;
  return f;
}

ModelParams random_params(int hidden, std::uint64_t seed) {
  ModelParams p = init_params(hidden, seed);
  // Push the biases off zero so the checks exercise every parameter.
  Rng rng(seed + 1);
  for (auto& b : p.b1) b = rng.uniform(-0.3, 0.3);
  p.b_score = rng.uniform(-0.3, 0.3);
  p.b_auth = rng.uniform(-0.3, 0.3);
  return p;
}

/// Central finite differences against the analytic gradient; returns the
/// max normalized error over all parameters.
template <typename LossFn>
double gradient_check(const ModelParams& params, const LossFn& loss_fn,
                      const ModelParams& analytic) {
  constexpr double kEps = 1e-6;
  ModelParams work = params;
  ModelParams grads = analytic;
  const auto ptr = param_ptrs(work);
  const auto gptr = param_ptrs(grads);
  double worst = 0.0;
  for (std::size_t i = 0; i < ptr.size(); ++i) {
    const double saved = *ptr[i];
    *ptr[i] = saved + kEps;
    const double up = loss_fn(work);
    *ptr[i] = saved - kEps;
    const double down = loss_fn(work);
    *ptr[i] = saved;
    const double fd = (up - down) / (2.0 * kEps);
    const double g = *gptr[i];
    const double err = std::abs(fd - g) / std::max({1.0, std::abs(fd),
                                                    std::abs(g)});
    worst = std::max(worst, err);
  }
  return worst;
}

TrainingPools separable_pool(int n_train, std::uint64_t seed,
                             const char* dataset = "sep") {
  // Linearly rankable: latent score is a fixed linear functional of the
  // features, pair labels follow it exactly.
  Rng rng(seed);
  FeatureVector w{};
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  auto latent = [&w](const FeatureVector& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
    return s;
  };
  TrainingPools pools;
  auto& pairs = pools.pairs[dataset];
  for (int i = 0; i < n_train; ++i) {
    PairItem item;
    item.a = random_features(rng);
    item.b = random_features(rng);
    if (latent(item.a) == latent(item.b)) continue;
    item.winner = latent(item.a) > latent(item.b) ? PairWinner::kFirst
                                                  : PairWinner::kSecond;
    pairs.push_back(item);
  }
  return pools;
}

}  // namespace

TEST_CASE("init_params is deterministic with zero biases inside bounds") {
  const ModelParams a = init_params(16, 1);
  const ModelParams b = init_params(16, 1);
  CHECK(a.w1 == b.w1);
  CHECK(a.w_score == b.w_score);
  CHECK(a.w_auth == b.w_auth);
  for (const double v : a.b1) CHECK(v == 0.0);
  CHECK(a.b_score == 0.0);
  CHECK(a.b_auth == 0.0);

  const double a1 = std::sqrt(6.0 / (12 + 16));
  for (const double v : a.w1) {
    CHECK(v > -a1);
    CHECK(v < a1);
  }
  const double a2 = std::sqrt(6.0 / (16 + 1));
  for (const double v : a.w_score) {
    CHECK(v > -a2);
    CHECK(v < a2);
  }
  CHECK(init_params(16, 2).w1 != a.w1);
  CHECK_THROWS_AS(init_params(0, 1), ValidationError);
}

TEST_CASE("score of zero weights is exactly 50") {
  const ModelParams zero = ModelParams::zeros_like(init_params(8, 0));
  Rng rng(3);
  const FeatureVector f = random_features(rng);
  CHECK(score(zero, f) == 50.0);
  CHECK(score_logit(zero, f) == 0.0);
}

TEST_CASE("score matches a hand-evaluated one-unit network") {
  ModelParams p;
  p.hidden = 1;
  p.w1.resize(12);
  for (int i = 0; i < 12; ++i) p.w1[static_cast<std::size_t>(i)] = 0.05 * (i + 1);
  p.b1 = {0.1};
  p.w_score = {0.8};
  p.b_score = -0.2;
  p.w_auth = {0.0};
  FeatureVector f{};
  for (int i = 0; i < 12; ++i) f[static_cast<std::size_t>(i)] = 0.1 * (i + 1);
  // Evaluated independently: tanh(3.35)*0.8 - 0.2 through the sigmoid.
  CHECK(score(p, f) == doctest::Approx(64.52061501484077).epsilon(1e-12));
}

TEST_CASE("score is pure") {
  const ModelParams p = random_params(16, 4);
  Rng rng(5);
  const FeatureVector f = random_features(rng);
  CHECK(score(p, f) == score(p, f));
  for (int i = 0; i < 20; ++i) {
    const FeatureVector g = random_features(rng);
    const double s = score(p, g);
    CHECK(s > 0.0);
    CHECK(s < 100.0);
  }
}

TEST_CASE("pairwise loss at equal logits is ln 2") {
  const ModelParams zero = ModelParams::zeros_like(init_params(8, 0));
  Rng rng(6);
  const FeatureVector a = random_features(rng);
  const FeatureVector b = random_features(rng);
  CHECK(pairwise_loss_grad(zero, a, b, PairWinner::kFirst).loss ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));
}

TEST_CASE("pairwise loss is permutation-consistent, exactly") {
  const ModelParams p = random_params(16, 7);
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const FeatureVector a = random_features(rng);
    const FeatureVector b = random_features(rng);
    const LossGrad ab = pairwise_loss_grad(p, a, b, PairWinner::kFirst);
    const LossGrad ba = pairwise_loss_grad(p, b, a, PairWinner::kSecond);
    CHECK(ab.loss == ba.loss);
  }
}

TEST_CASE("absolute loss basics") {
  const ModelParams zero = ModelParams::zeros_like(init_params(8, 0));
  Rng rng(9);
  const FeatureVector f = random_features(rng);
  // Zero weights score 50; target 100 leaves residual 0.5.
  CHECK(absolute_loss_grad(zero, f, 100.0).loss == doctest::Approx(0.25));
  // score == target: zero loss, zero gradient.
  const LossGrad at_min = absolute_loss_grad(zero, f, 50.0);
  CHECK(at_min.loss == 0.0);
  ModelParams g = at_min.grad;
  for (const double* v : param_ptrs(g)) CHECK(*v == 0.0);
  CHECK_THROWS_AS(absolute_loss_grad(zero, f, 101.0), ValidationError);
  CHECK_THROWS_AS(absolute_loss_grad(zero, f, -0.5), ValidationError);
}

TEST_CASE("authenticity loss basics") {
  const ModelParams zero = ModelParams::zeros_like(init_params(8, 0));
  Rng rng(10);
  const FeatureVector f = random_features(rng);
  CHECK(authenticity_loss_grad(zero, f, true).loss ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(authenticity_loss_grad(zero, f, false).loss ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));

  // Loss falls monotonically as the head grows confident in the label.
  ModelParams p = ModelParams::zeros_like(init_params(1, 0));
  p.w1[0] = 1.0;  // gives h > 0 for positive features
  double prev = 1e9;
  for (const double w : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    p.w_auth[0] = w;
    const double loss = authenticity_loss_grad(p, f, true).loss;
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams p = random_params(6, 100 + trial);
    const FeatureVector a = random_features(rng);
    const FeatureVector b = random_features(rng);
    const double target = rng.uniform(0.0, 100.0);
    const bool label = rng.uniform() < 0.5;

    const LossGrad pw = pairwise_loss_grad(
        p, a, b, label ? PairWinner::kFirst : PairWinner::kSecond);
    CHECK(gradient_check(p,
                         [&](const ModelParams& q) {
                           return pairwise_loss_grad(
                                      q, a, b,
                                      label ? PairWinner::kFirst
                                            : PairWinner::kSecond)
                               .loss;
                         },
                         pw.grad) <= 1e-5);

    const LossGrad abs_lg = absolute_loss_grad(p, a, target);
    CHECK(gradient_check(p,
                         [&](const ModelParams& q) {
                           return absolute_loss_grad(q, a, target).loss;
                         },
                         abs_lg.grad) <= 1e-5);

    const LossGrad auth_lg = authenticity_loss_grad(p, a, label);
    CHECK(gradient_check(p,
                         [&](const ModelParams& q) {
                           return authenticity_loss_grad(q, a, label).loss;
                         },
                         auth_lg.grad) <= 1e-5);
  }
}

TEST_CASE("sample_batch: singleton task set always yields that task") {
  TrainingPools pools = separable_pool(100, 12);
  Rng rng(13);
  auto& scores = pools.scores["sep"];
  for (int i = 0; i < 10; ++i) {
    scores.push_back(ScalarItem{random_features(rng), 50.0});
  }
  StageSpec spec;
  spec.stage = StageId::kRelativity;
  spec.tasks = {TaskId::kRelativity};
  spec.dataset_ids = {"sep"};
  spec.steps = 10;
  spec.batch_size = 4;
  spec.seed = 5;
  for (int step = 0; step < 50; ++step) {
    const Batch b = sample_batch(pools, spec, step);
    CHECK(b.task == TaskId::kRelativity);
    CHECK(b.pairs.size() == 4);
    CHECK(b.scores.empty());
    CHECK(b.auths.empty());
  }
}

TEST_CASE("sample_batch is deterministic and single-task") {
  TrainingPools pools = separable_pool(50, 14);
  Rng rng(15);
  for (int i = 0; i < 10; ++i) {
    pools.scores["sep"].push_back(ScalarItem{random_features(rng), 25.0});
    pools.auths["sep"].push_back(AuthItem{random_features(rng), i % 2 == 0});
  }
  StageSpec spec;
  spec.stage = StageId::kMultifunctional;
  spec.tasks = {TaskId::kQuant, TaskId::kAuthenticity};
  spec.dataset_ids = {"sep"};
  spec.steps = 100;
  spec.batch_size = 8;
  spec.seed = 17;
  bool saw_quant = false, saw_auth = false;
  for (int step = 0; step < 1000; ++step) {
    const Batch a = sample_batch(pools, spec, step);
    const Batch b = sample_batch(pools, spec, step);
    CHECK(a.task == b.task);
    const int kinds = (a.pairs.empty() ? 0 : 1) + (a.scores.empty() ? 0 : 1) +
                      (a.auths.empty() ? 0 : 1);
    CHECK(kinds == 1);
    saw_quant = saw_quant || a.task == TaskId::kQuant;
    saw_auth = saw_auth || a.task == TaskId::kAuthenticity;
  }
  CHECK(saw_quant);
  CHECK(saw_auth);

  StageSpec missing = spec;
  missing.dataset_ids = {"absent"};
  CHECK_THROWS_AS(sample_batch(pools, missing, 0), ValidationError);
}

TEST_CASE("train_stage: zero learning rate leaves parameters untouched") {
  const TrainingPools pools = separable_pool(50, 18);
  StageSpec spec;
  spec.stage = StageId::kRelativity;
  spec.tasks = {TaskId::kRelativity};
  spec.dataset_ids = {"sep"};
  spec.steps = 1;
  spec.batch_size = 4;
  spec.learning_rate = 0.0;
  spec.seed = 3;
  const ModelParams before = init_params(8, 44);
  const StageResult result = train_stage(before, spec, pools);
  CHECK(result.params.w1 == before.w1);
  CHECK(result.params.b_score == before.b_score);
  REQUIRE(result.loss_trace.size() == 1);

  StageSpec bad = spec;
  bad.steps = 0;
  CHECK_THROWS_AS(train_stage(before, bad, pools), ValidationError);
}

TEST_CASE("train_stage is bit-deterministic") {
  const TrainingPools pools = separable_pool(200, 19);
  StageSpec spec;
  spec.stage = StageId::kRelativity;
  spec.tasks = {TaskId::kRelativity};
  spec.dataset_ids = {"sep"};
  spec.steps = 50;
  spec.batch_size = 16;
  spec.learning_rate = 0.05;
  spec.seed = 21;
  const ModelParams init = init_params(16, 7);
  const StageResult a = train_stage(init, spec, pools);
  const StageResult b = train_stage(init, spec, pools);
  CHECK(a.params.w1 == b.params.w1);
  CHECK(a.params.w_score == b.params.w_score);
  CHECK(a.loss_trace == b.loss_trace);
}

TEST_CASE("train_stage aborts on divergence with the step index") {
  const TrainingPools pools = separable_pool(50, 20);
  StageSpec spec;
  spec.stage = StageId::kRelativity;
  spec.tasks = {TaskId::kRelativity};
  spec.dataset_ids = {"sep"};
  spec.steps = 10;
  spec.batch_size = 4;
  spec.learning_rate = 1e308;  // update overflows immediately
  spec.seed = 2;
  try {
    train_stage(init_params(8, 3), spec, pools);
    FAIL("expected divergence");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.step() >= 0);
    CHECK(e.step() < spec.steps);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("relativity training learns a separable pool") {
  // One latent ranking function; disjoint train and probe pairs from it.
  TrainingPools train_pool = separable_pool(5000, 22);
  TrainingPools held_out;
  auto& all_pairs = train_pool.pairs.at("sep");
  auto& probe_pairs = held_out.pairs["sep"];
  probe_pairs.assign(all_pairs.end() - 1000, all_pairs.end());
  all_pairs.resize(all_pairs.size() - 1000);

  StageSpec spec;
  spec.stage = StageId::kRelativity;
  spec.tasks = {TaskId::kRelativity};
  spec.dataset_ids = {"sep"};
  spec.steps = 2000;
  spec.batch_size = 32;
  spec.learning_rate = 0.05;
  spec.seed = 31;
  const StageResult result = train_stage(init_params(16, 8), spec, train_pool);

  int ranking_hits = 0, ab_hits = 0;
  const auto& probe = held_out.pairs.at("sep");
  for (const PairItem& item : probe) {
    const PairWinner by_logit =
        predict_pair(result.params, item.a, item.b, "a", "b");
    if (by_logit == item.winner) ++ranking_hits;
    const double sa = score(result.params, item.a);
    const double sb = score(result.params, item.b);
    const PairWinner by_score =
        sa > sb ? PairWinner::kFirst
                : (sb > sa ? PairWinner::kSecond : PairWinner::kFirst);
    if (by_score == item.winner) ++ab_hits;
  }
  const double ranking_acc =
      static_cast<double>(ranking_hits) / static_cast<double>(probe.size());
  const double ab_acc =
      static_cast<double>(ab_hits) / static_cast<double>(probe.size());
  CHECK(ranking_acc > 0.9);
  // Single scalar head: the two comparators are the same monotone transform.
  CHECK(ranking_acc == ab_acc);

  // Loss moving average shrinks between step 100 and step 2000.
  const auto& trace = result.loss_trace;
  auto window_mean = [&](std::size_t end) {
    double sum = 0.0;
    for (std::size_t i = end - 100; i < end; ++i) sum += trace[i];
    return sum / 100.0;
  };
  CHECK(window_mean(2000) < window_mean(200));
}

TEST_CASE("argmax invariance under monotone transforms of the logit") {
  const ModelParams p = random_params(12, 29);
  Rng rng(30);
  for (int i = 0; i < 50; ++i) {
    const FeatureVector a = random_features(rng);
    const FeatureVector b = random_features(rng);
    const double ua = score_logit(p, a);
    const double ub = score_logit(p, b);
    auto warp = [](double u) { return std::exp(2.0 * u) + 3.0 * u; };
    const bool direct = ua > ub;
    const bool warped = warp(ua) > warp(ub);
    CHECK(direct == warped);
    const PairWinner pw = predict_pair(p, a, b, "x", "y");
    if (ua != ub) {
      CHECK(pw == (direct ? PairWinner::kFirst : PairWinner::kSecond));
    }
  }
  // Exact tie (identical features): lexicographically smaller id wins.
  const FeatureVector same = random_features(rng);
  CHECK(predict_pair(p, same, same, "aaa", "zzz") == PairWinner::kFirst);
  CHECK(predict_pair(p, same, same, "zzz", "aaa") == PairWinner::kSecond);
}

TEST_CASE("curriculum: single multifunctional stage equals train_stage") {
  TrainingPools pools = separable_pool(100, 24);
  Rng rng(25);
  for (int i = 0; i < 40; ++i) {
    pools.scores["sep"].push_back(
        ScalarItem{random_features(rng), rng.uniform(0.0, 100.0)});
    pools.auths["sep"].push_back(AuthItem{random_features(rng), i % 2 == 0});
  }
  StageSpec spec;
  spec.stage = StageId::kMultifunctional;
  spec.tasks = {TaskId::kQuant, TaskId::kAuthenticity};
  spec.dataset_ids = {"sep"};
  spec.steps = 40;
  spec.batch_size = 8;
  spec.learning_rate = 0.02;
  spec.seed = 26;

  CurriculumPlan plan;
  plan.stages = {spec};
  plan.anchor_dataset = "sep";
  const ModelParams init = init_params(8, 27);
  const ModelParams via_plan = run_curriculum(init, plan, pools);
  const ModelParams direct = train_stage(init, spec, pools).params;
  CHECK(via_plan.w1 == direct.w1);
  CHECK(via_plan.w_score == direct.w_score);
  CHECK(via_plan.b_auth == direct.b_auth);
}

TEST_CASE("curriculum rejects out-of-order stages and a foreign anchor") {
  const TrainingPools pools = separable_pool(50, 28);
  StageSpec relativity;
  relativity.stage = StageId::kRelativity;
  relativity.tasks = {TaskId::kRelativity};
  relativity.dataset_ids = {"sep"};
  relativity.steps = 1;
  relativity.batch_size = 2;
  relativity.seed = 1;
  StageSpec multi = relativity;
  multi.stage = StageId::kMultifunctional;
  multi.tasks = {TaskId::kQuant};

  CurriculumPlan reversed;
  reversed.stages = {multi, relativity};
  CHECK_THROWS_WITH_AS(
      run_curriculum(init_params(4, 1), reversed, pools),
      doctest::Contains("out of order"), ValidationError);

  CurriculumPlan duplicate;
  duplicate.stages = {relativity, relativity};
  CHECK_THROWS_AS(run_curriculum(init_params(4, 1), duplicate, pools),
                  ValidationError);

  CurriculumPlan foreign;
  foreign.stages = {multi};
  foreign.anchor_dataset = "elsewhere";
  CHECK_THROWS_WITH_AS(run_curriculum(init_params(4, 1), foreign, pools),
                       doctest::Contains("anchor"), ValidationError);

  CurriculumPlan empty;
  CHECK_THROWS_AS(run_curriculum(init_params(4, 1), empty, pools),
                  ValidationError);
}

TEST_CASE("curate_pools keeps the lowest-loss half") {
  Rng rng(31);
  const ModelParams p = random_params(8, 32);
  TrainingPools pools;
  for (int i = 0; i < 20; ++i) {
    pools.scores["d"].push_back(
        ScalarItem{random_features(rng), rng.uniform(0.0, 100.0)});
  }
  const TrainingPools curated = curate_pools(pools, p, 0.5);
  const auto& kept = curated.scores.at("d");
  CHECK(kept.size() == 10);
  double worst_kept = 0.0;
  for (const auto& item : kept) {
    worst_kept = std::max(worst_kept,
                          absolute_loss_grad(p, item.f, item.target).loss);
  }
  std::size_t better_than_worst = 0;
  for (const auto& item : pools.scores.at("d")) {
    if (absolute_loss_grad(p, item.f, item.target).loss <= worst_kept) {
      ++better_than_worst;
    }
  }
  CHECK(better_than_worst >= kept.size());
  CHECK_THROWS_AS(curate_pools(pools, p, 0.0), ValidationError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const ModelParams p = random_params(16, 33);
  const auto dir = std::filesystem::temp_directory_path() / "iqlab_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(p, "relativity,multifunctional", 99, dir / "m.ckpt");
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  CHECK(ck.provenance == "relativity,multifunctional");
  CHECK(ck.seed == 99);
  CHECK(ck.params.hidden == p.hidden);
  CHECK(ck.params.w1 == p.w1);
  CHECK(ck.params.b1 == p.b1);
  CHECK(ck.params.w_score == p.w_score);
  CHECK(ck.params.w_auth == p.w_auth);
  CHECK(ck.params.b_score == p.b_score);
  CHECK(ck.params.b_auth == p.b_auth);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), ValidationError);
  std::filesystem::remove_all(dir);
}
