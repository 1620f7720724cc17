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

#include "iqlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "iqlab/error.hpp"
#include "iqlab/rng.hpp"
#include "iqlab/util.hpp"

namespace iqlab {

namespace {

using nlohmann::json;

std::uint64_t tag_seed(std::uint64_t seed, const std::string& tag) {
  return mix_seed(seed, fnv1a(tag));
}

std::vector<std::string> synth_dataset_names(const SynthConfig& synth) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < synth.warps.size(); ++i) {
    names.push_back("d" + std::to_string(i) + "_" +
                    warp_kind_name(synth.warps[i].kind));
  }
  return names;
}

DatasetManifest normalize_and_split(DatasetManifest m,
                                    const RunConfig& config) {
  if (!m.normalized()) m = normalize_scores(std::move(m));
  const bool has_splits =
      std::all_of(m.records.begin(), m.records.end(), [](const auto& r) {
        return r.split != Split::kUnassigned;
      });
  if (!has_splits) {
    const std::uint64_t seed = tag_seed(config.seed, "split:" + m.name);
    m = config.split.by_reference
            ? split_by_reference(std::move(m), *config.split.by_reference,
                                 seed)
            : split_random(std::move(m), config.split.train_fraction, seed);
  }
  return m;
}

std::vector<const AnnotatedImage*> split_records(const DatasetManifest& m,
                                                 Split split) {
  std::vector<const AnnotatedImage*> out;
  for (const auto& r : m.records) {
    if (r.split == split) out.push_back(&r);
  }
  std::sort(out.begin(), out.end(),
            [](const AnnotatedImage* a, const AnnotatedImage* b) {
              return a->id < b->id;
            });
  return out;
}

const FeatureVector& feature_of(const FeatureTable& features,
                                const std::string& dataset,
                                const std::string& id) {
  const auto d = features.find(dataset);
  if (d == features.end()) {
    throw ValidationError("no features extracted for dataset '" + dataset +
                          "'");
  }
  const auto f = d->second.find(id);
  if (f == d->second.end()) {
    throw ValidationError("no features extracted for image '" + id +
                          "' in dataset '" + dataset + "'");
  }
  return f->second;
}

// --- config parsing --------------------------------------------------------

WarpSpec warp_from_json(const json& j) {
  WarpSpec w;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") {
    w.kind = WarpKind::kIdentity;
  } else if (kind == "affine") {
    w.kind = WarpKind::kAffine;
  } else if (kind == "power") {
    w.kind = WarpKind::kPower;
  } else if (kind == "logistic") {
    w.kind = WarpKind::kLogistic;
  } else {
    throw ValidationError("config: unknown warp kind '" + kind + "'");
  }
  w.p1 = j.value("p1", 0.0);
  w.p2 = j.value("p2", 0.0);
  w.noise_sd = j.value("noise_sd", 0.0);
  validate_warp(w);
  return w;
}

StageSpec stage_from_json(const json& j) {
  StageSpec s;
  const std::string stage = j.at("stage").get<std::string>();
  if (stage == "relativity") {
    s.stage = StageId::kRelativity;
  } else if (stage == "multifunctional") {
    s.stage = StageId::kMultifunctional;
  } else if (stage == "refinement") {
    s.stage = StageId::kRefinement;
  } else {
    throw ValidationError("config: unknown stage '" + stage + "'");
  }
  for (const auto& t : j.at("tasks")) {
    const auto task = parse_task_name(t.get<std::string>());
    if (!task) {
      throw ValidationError("config: unknown task '" + t.get<std::string>() +
                            "'");
    }
    s.tasks.insert(*task);
  }
  s.dataset_ids = j.at("datasets").get<std::vector<std::string>>();
  if (j.contains("task_datasets")) {
    for (const auto& [key, value] : j.at("task_datasets").items()) {
      const auto task = parse_task_name(key);
      if (!task) {
        throw ValidationError("config: unknown task '" + key +
                              "' in task_datasets");
      }
      s.task_datasets[*task] = value.get<std::vector<std::string>>();
    }
  }
  s.steps = j.at("steps").get<int>();
  s.batch_size = j.value("batch_size", 32);
  s.learning_rate = j.at("learning_rate").get<double>();
  s.seed = j.value("seed", 0ULL);
  return s;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig config;
  SynthConfig synth;
  synth.latent.n_images = 200;
  synth.latent.image_size = 64;
  synth.latent.degradation_grid = default_degradation_grid();
  synth.latent.seed = 0;
  synth.warps = default_warps();
  config.synth = std::move(synth);
  return config;
}

RunConfig parse_run_config(const std::string& text,
                           const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ValidationError(origin + ": config is not valid JSON");
  }
  RunConfig config = default_run_config();
  config.seed = j.value("seed", config.seed);
  config.jobs = j.value("jobs", config.jobs);
  if (config.jobs < 1) {
    throw ValidationError(origin + ": jobs must be >= 1");
  }
  if (j.contains("out_dir")) {
    config.out_dir = j.at("out_dir").get<std::string>();
  }

  if (j.contains("source")) {
    const json& src = j.at("source");
    const bool has_synth = src.contains("synth");
    const bool has_manifests = src.contains("manifests");
    if (has_synth == has_manifests) {
      throw ValidationError(
          origin + ": source must declare exactly one of synth, manifests");
    }
    if (has_manifests) {
      config.synth.reset();
      for (const auto& p : src.at("manifests")) {
        config.manifests.emplace_back(p.get<std::string>());
      }
      if (config.manifests.empty()) {
        throw ValidationError(origin + ": source.manifests is empty");
      }
    } else {
      const json& sj = src.at("synth");
      SynthConfig synth;
      synth.latent.n_images = sj.value("n_images", 200);
      synth.latent.image_size = sj.value("image_size", 64);
      synth.latent.seed = sj.value("latent_seed", 0ULL);
      synth.latent.degradation_grid = default_degradation_grid();
      if (sj.contains("grid")) {
        synth.latent.degradation_grid.clear();
        for (const auto& lvl : sj.at("grid")) {
          synth.latent.degradation_grid.push_back(
              DegradeLevel{lvl.at(0).get<double>(), lvl.at(1).get<int>()});
        }
      }
      if (sj.contains("warps")) {
        synth.warps.clear();
        for (const auto& w : sj.at("warps")) {
          synth.warps.push_back(warp_from_json(w));
        }
      } else {
        synth.warps = default_warps();
      }
      config.synth = std::move(synth);
    }
  }

  if (j.contains("split")) {
    const json& sj = j.at("split");
    if (sj.contains("by_reference")) {
      config.split.by_reference = sj.at("by_reference").get<int>();
    }
    config.split.train_fraction =
        sj.value("train_fraction", config.split.train_fraction);
  }
  if (j.contains("corpus")) {
    const json& cj = j.at("corpus");
    config.corpus.pairs_per_record =
        cj.value("pairs_per_record", config.corpus.pairs_per_record);
    config.corpus.include_attribute_pairs = cj.value(
        "include_attribute_pairs", config.corpus.include_attribute_pairs);
  }
  if (j.contains("train")) {
    const json& tj = j.at("train");
    const std::string mode = tj.value("benchmark", "strategies");
    if (mode == "strategies") {
      config.train.benchmark = BenchmarkMode::kStrategies;
    } else if (mode == "matrix") {
      config.train.benchmark = BenchmarkMode::kMatrix;
    } else if (mode == "none") {
      config.train.benchmark = BenchmarkMode::kNone;
    } else {
      throw ValidationError(origin + ": unknown benchmark mode '" + mode +
                            "'");
    }
    config.train.hidden_size = tj.value("hidden_size", 16);
    config.train.anchor_index = tj.value("anchor_index", 0);
    config.train.anchor_dataset = tj.value("anchor", std::string());
    if (tj.contains("stage_defaults")) {
      const json& dj = tj.at("stage_defaults");
      TrainDefaults& d = config.train.defaults;
      d.relativity_steps = dj.value("relativity_steps", d.relativity_steps);
      d.multifunctional_steps =
          dj.value("multifunctional_steps", d.multifunctional_steps);
      d.refinement_steps = dj.value("refinement_steps", d.refinement_steps);
      d.batch_size = dj.value("batch_size", d.batch_size);
      d.relativity_lr = dj.value("relativity_lr", d.relativity_lr);
      d.multifunctional_lr =
          dj.value("multifunctional_lr", d.multifunctional_lr);
      d.refinement_lr = dj.value("refinement_lr", d.refinement_lr);
    }
    if (tj.contains("stages")) {
      for (const auto& sj : tj.at("stages")) {
        config.train.stages.push_back(stage_from_json(sj));
      }
    }
    if (config.train.benchmark == BenchmarkMode::kNone &&
        config.train.stages.empty()) {
      throw ValidationError(
          origin + ": benchmark 'none' requires an explicit train.stages plan");
    }
  }
  if (j.contains("eval")) {
    const json& ej = j.at("eval");
    if (ej.contains("targets")) {
      config.eval.targets = ej.at("targets").get<std::vector<std::string>>();
    }
    config.eval.test_pairs = ej.value("test_pairs", config.eval.test_pairs);
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path), path.string());
}

PreparedData prepare_datasets(const RunConfig& config) {
  PreparedData out;
  const std::filesystem::path data_dir = config.out_dir / "data";
  const std::filesystem::path normalized_dir = config.out_dir / "normalized";

  if (config.synth) {
    for (const std::string& name : synth_dataset_names(*config.synth)) {
      const auto normalized = normalized_dir / (name + ".manifest");
      const auto raw = data_dir / (name + ".manifest");
      const auto& source =
          std::filesystem::exists(normalized) ? normalized : raw;
      if (!std::filesystem::exists(source)) {
        throw ValidationError("missing synthetic manifest " + raw.string() +
                              " (run the synth command first)");
      }
      out.datasets.push_back(
          normalize_and_split(load_manifest(source), config));
      out.base_dirs.push_back(data_dir);
    }
  } else {
    if (config.manifests.empty()) {
      throw ValidationError("config names no data source");
    }
    for (const auto& path : config.manifests) {
      const auto normalized =
          normalized_dir / (path.stem().string() + ".manifest");
      const bool have_normalized = std::filesystem::exists(normalized);
      const auto& source = have_normalized ? normalized : path;
      out.datasets.push_back(
          normalize_and_split(load_manifest(source), config));
      out.base_dirs.push_back(path.parent_path());
    }
  }
  return out;
}

FeatureTable features_from_disk(const PreparedData& data, int jobs) {
  FeatureTable table;
  for (std::size_t d = 0; d < data.datasets.size(); ++d) {
    const DatasetManifest& m = data.datasets[d];
    auto& dest = table[m.name];
    std::vector<FeatureVector> computed(m.records.size());
    parallel_for(jobs, m.records.size(), [&](std::size_t i) {
      computed[i] = extract_features(
          decode_image(data.base_dirs[d] / m.records[i].image_path));
    });
    for (std::size_t i = 0; i < m.records.size(); ++i) {
      dest[m.records[i].id] = computed[i];
    }
  }
  return table;
}

FeatureTable features_from_suite(const std::vector<SyntheticDataset>& suite,
                                 int jobs) {
  FeatureTable table;
  for (const SyntheticDataset& ds : suite) {
    auto& dest = table[ds.manifest.name];
    std::vector<std::pair<const std::string*, const ImageBuffer*>> items;
    items.reserve(ds.images.size());
    for (const auto& [id, img] : ds.images) items.push_back({&id, &img});
    std::vector<FeatureVector> computed(items.size());
    parallel_for(jobs, items.size(), [&](std::size_t i) {
      computed[i] = extract_features(*items[i].second);
    });
    for (std::size_t i = 0; i < items.size(); ++i) {
      dest[*items[i].first] = computed[i];
    }
  }
  return table;
}

TrainingPools build_pools(const std::vector<DatasetManifest>& datasets,
                          const FeatureTable& features,
                          const CorpusConfig& corpus, std::uint64_t seed) {
  if (corpus.pairs_per_record < 1) {
    throw ValidationError("corpus: pairs_per_record must be >= 1");
  }
  TrainingPools pools;
  for (const DatasetManifest& m : datasets) {
    const auto train = split_records(m, Split::kTrain);
    if (train.empty()) {
      throw ValidationError("dataset '" + m.name + "' has no train split");
    }

    std::vector<Metric> pair_metrics = {Metric::kMos};
    if (corpus.include_attribute_pairs) {
      for (const Metric attr : attribute_metrics()) {
        const bool everywhere =
            std::all_of(train.begin(), train.end(), [&](const auto* r) {
              return r->attributes.count(attr) > 0;
            });
        if (everywhere) pair_metrics.push_back(attr);
      }
    }
    auto& pair_pool = pools.pairs[m.name];
    for (const Metric metric : pair_metrics) {
      const int count =
          corpus.pairs_per_record * static_cast<int>(train.size());
      const auto pairs = build_relativity_pairs(
          m, count, metric,
          tag_seed(seed, "pairs:" + m.name + ":" + metric_key(metric)));
      for (const RelativityPair& p : pairs) {
        pair_pool.push_back(PairItem{feature_of(features, m.name, p.a.id),
                                     feature_of(features, m.name, p.b.id),
                                     p.winner});
      }
    }

    auto& score_pool = pools.scores[m.name];
    for (const AnnotatedImage* r : train) {
      score_pool.push_back(
          ScalarItem{feature_of(features, m.name, r->id), *r->mos});
    }

    const bool has_auth =
        std::all_of(train.begin(), train.end(),
                    [](const auto* r) { return r->authentic.has_value(); });
    if (has_auth) {
      auto& auth_pool = pools.auths[m.name];
      for (const AnnotatedImage* r : train) {
        auth_pool.push_back(
            AuthItem{feature_of(features, m.name, r->id), *r->authentic});
      }
    }
  }
  return pools;
}

DatasetMetrics evaluate_on_dataset(const ModelParams& params,
                                   const DatasetManifest& dataset,
                                   const FeatureTable& features,
                                   int test_pairs, std::uint64_t seed) {
  const auto test = split_records(dataset, Split::kTest);
  if (test.size() < 2) {
    throw ValidationError("dataset '" + dataset.name +
                          "' has fewer than 2 test records");
  }
  std::vector<double> predictions, targets;
  predictions.reserve(test.size());
  targets.reserve(test.size());
  for (const AnnotatedImage* r : test) {
    predictions.push_back(
        score(params, feature_of(features, dataset.name, r->id)));
    targets.push_back(*r->mos);
  }

  DatasetMetrics out;
  out.srcc = srcc(predictions, targets);
  out.plcc = plcc(predictions, targets);

  // Held-out pair accuracy: ranking head vs. score differences ("A-B").
  // For this scorer the two comparators are the same monotone transform, so
  // reporting both documents the equality rather than asserting a gap.
  if (test_pairs > 0) {
    Rng rng(tag_seed(seed, "eval_pairs:" + dataset.name));
    std::vector<PairWinner> truth, ranking, ab;
    long long attempts = 0;
    const long long max_attempts = 1000 + 200LL * test_pairs;
    while (static_cast<int>(truth.size()) < test_pairs &&
           attempts < max_attempts) {
      ++attempts;
      const std::size_t i =
          static_cast<std::size_t>(rng.uniform_int(test.size()));
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform_int(test.size()));
      if (i == j || *test[i]->mos == *test[j]->mos) continue;
      truth.push_back(*test[i]->mos > *test[j]->mos ? PairWinner::kFirst
                                                    : PairWinner::kSecond);
      const FeatureVector& fa = feature_of(features, dataset.name,
                                           test[i]->id);
      const FeatureVector& fb = feature_of(features, dataset.name,
                                           test[j]->id);
      ranking.push_back(
          predict_pair(params, fa, fb, test[i]->id, test[j]->id));
      const double sa = score(params, fa);
      const double sb = score(params, fb);
      PairWinner ab_winner;
      if (sa != sb) {
        ab_winner = sa > sb ? PairWinner::kFirst : PairWinner::kSecond;
      } else {
        ab_winner = test[i]->id <= test[j]->id ? PairWinner::kFirst
                                               : PairWinner::kSecond;
      }
      ab.push_back(ab_winner);
    }
    if (!truth.empty()) {
      out.pairwise_accuracy = pairwise_accuracy(ranking, truth);
      out.ab_accuracy = pairwise_accuracy(ab, truth);
    }
  }

  const bool has_auth = std::all_of(test.begin(), test.end(), [](const auto* r) {
    return r->authentic.has_value();
  });
  if (has_auth) {
    std::vector<double> probs;
    std::vector<int> labels;
    for (const AnnotatedImage* r : test) {
      probs.push_back(predict_authenticity(
          params, feature_of(features, dataset.name, r->id)));
      labels.push_back(*r->authentic ? 1 : 0);
    }
    out.authenticity_accuracy = binary_accuracy(probs, labels, 0.5);
  }
  return out;
}

double average_srcc(const std::map<std::string, DatasetMetrics>& per_dataset) {
  if (per_dataset.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [name, m] : per_dataset) sum += m.srcc;
  return sum / static_cast<double>(per_dataset.size());
}

ExperimentResult run_inconformity_experiment(const RunConfig& config,
                                             bool include_strategies,
                                             bool include_matrix) {
  if (!config.synth) {
    throw ValidationError(
        "the inconformity experiment requires a synthetic data source");
  }
  const SynthConfig& synth = *config.synth;
  std::vector<SyntheticDataset> suite = generate_synthetic_suite(
      synth.latent, synth.warps, config.seed, config.jobs);

  ExperimentResult result;
  std::vector<DatasetManifest> datasets;
  for (SyntheticDataset& ds : suite) {
    datasets.push_back(normalize_and_split(ds.manifest, config));
    result.datasets.push_back(datasets.back().name);
  }
  const FeatureTable features = features_from_suite(suite, config.jobs);
  const TrainingPools pools =
      build_pools(datasets, features, config.corpus, config.seed);

  const InconformityBenchmark bench = make_inconformity_benchmark(
      result.datasets, config.train.anchor_index, config.seed,
      config.train.defaults);

  auto run_plan = [&](const NamedPlan& plan) {
    ModelParams params = init_params(config.train.hidden_size,
                                     tag_seed(config.seed, "init"));
    params = run_curriculum(std::move(params), plan.plan, pools);
    StrategyOutcome outcome;
    outcome.name = plan.name;
    for (const DatasetManifest& m : datasets) {
      outcome.per_dataset[m.name] = evaluate_on_dataset(
          params, m, features, config.eval.test_pairs, config.seed);
    }
    outcome.avg_srcc = average_srcc(outcome.per_dataset);
    return outcome;
  };

  if (include_strategies) {
    for (const NamedPlan& plan : bench.strategies) {
      result.strategies.push_back(run_plan(plan));
    }
  }
  if (include_matrix) {
    for (const NamedPlan& plan : bench.matrix) {
      result.matrix.push_back(run_plan(plan));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_synth(const RunConfig& config) {
  if (!config.synth) {
    throw ValidationError("synth command requires a synthetic data source");
  }
  const std::vector<SyntheticDataset> suite = generate_synthetic_suite(
      config.synth->latent, config.synth->warps, config.seed, config.jobs);
  const std::filesystem::path data_dir = config.out_dir / "data";
  for (const SyntheticDataset& ds : suite) {
    save_synthetic_dataset(ds, data_dir);
  }
}

void cmd_ingest(const RunConfig& config, bool use_empirical_range) {
  std::vector<DatasetManifest> raw;
  if (config.synth) {
    const std::filesystem::path data_dir = config.out_dir / "data";
    for (const std::string& name : synth_dataset_names(*config.synth)) {
      raw.push_back(load_manifest(data_dir / (name + ".manifest")));
    }
  } else {
    for (const auto& path : config.manifests) {
      raw.push_back(load_manifest(path));
    }
  }
  const std::filesystem::path normalized_dir = config.out_dir / "normalized";
  for (DatasetManifest& m : raw) {
    m = normalize_scores(std::move(m), use_empirical_range);
    m = normalize_and_split(std::move(m), config);
    save_manifest(m, normalized_dir / (m.name + ".manifest"));
  }
}

void cmd_build_corpus(const RunConfig& config) {
  const PreparedData data = prepare_datasets(config);
  const std::filesystem::path corpus_dir = config.out_dir / "corpus";

  for (const DatasetManifest& m : data.datasets) {
    auto write = [&](const std::vector<CorpusEntry>& entries,
                     const std::string& stem) {
      if (entries.empty()) return;
      write_corpus(entries, corpus_dir / (stem + ".txt"),
                   corpus_dir / (stem + ".sidecar.jsonl"));
    };

    std::vector<Metric> pair_metrics = {Metric::kMos};
    if (config.corpus.include_attribute_pairs) {
      const auto train = split_records(m, Split::kTrain);
      for (const Metric attr : attribute_metrics()) {
        if (std::all_of(train.begin(), train.end(), [&](const auto* r) {
              return r->attributes.count(attr) > 0;
            })) {
          pair_metrics.push_back(attr);
        }
      }
    }
    for (const Metric metric : pair_metrics) {
      const int count = config.corpus.pairs_per_record *
                        static_cast<int>(m.train_count());
      const auto pairs = build_relativity_pairs(
          m, count, metric,
          tag_seed(config.seed, "pairs:" + m.name + ":" + metric_key(metric)));
      std::vector<CorpusEntry> entries;
      entries.reserve(pairs.size());
      for (const RelativityPair& p : pairs) {
        entries.push_back(relativity_dialogue(p, m));
      }
      write(entries, m.name + "_relativity_" + metric_key(metric));
    }

    write(build_quantitative_samples(m, Metric::kMos), m.name + "_quant_mos");
    {
      const auto train = split_records(m, Split::kTrain);
      for (const Metric attr : attribute_metrics()) {
        if (!train.empty() &&
            std::all_of(train.begin(), train.end(), [&](const auto* r) {
              return r->attributes.count(attr) > 0;
            })) {
          write(build_quantitative_samples(m, attr),
                m.name + "_quant_" + metric_key(attr));
        }
      }
    }
    write(build_qualitative_samples(m), m.name + "_describe");
    const bool has_auth = std::all_of(
        m.records.begin(), m.records.end(),
        [](const auto& r) { return r.authentic.has_value(); });
    if (has_auth) {
      write(build_authenticity_samples(m), m.name + "_authenticity");
    }
  }
}

void cmd_indicators(const RunConfig& config) {
  const PreparedData data = prepare_datasets(config);
  std::ostringstream out;
  for (std::size_t d = 0; d < data.datasets.size(); ++d) {
    const DatasetManifest& m = data.datasets[d];
    std::vector<const AnnotatedImage*> records;
    for (const auto& r : m.records) records.push_back(&r);
    std::sort(records.begin(), records.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
    std::vector<IndicatorVector> values(records.size());
    parallel_for(config.jobs, records.size(), [&](std::size_t i) {
      values[i] = compute_indicators(
          decode_image(data.base_dirs[d] / records[i]->image_path));
    });
    for (std::size_t i = 0; i < records.size(); ++i) {
      const IndicatorVector& v = values[i];
      out << m.name << "/" << records[i]->id
          << " brightness=" << double_to_string(v.brightness)
          << " colorfulness=" << double_to_string(v.colorfulness)
          << " contrast=" << double_to_string(v.contrast)
          << " noisiness=" << double_to_string(v.noisiness)
          << " sharpness=" << double_to_string(v.sharpness) << "\n";
    }
  }
  atomic_write_file(config.out_dir / "indicators.txt", out.str());
}

namespace {

void write_model_artifacts(const RunConfig& config, const std::string& name,
                           const CurriculumPlan& plan,
                           const TrainingPools& pools) {
  const std::filesystem::path models_dir = config.out_dir / "models";
  ModelParams params =
      init_params(config.train.hidden_size, tag_seed(config.seed, "init"));
  std::string provenance;
  std::ostringstream trace;
  int global_step = 0;
  params = run_curriculum(
      std::move(params), plan, pools,
      [&](const StageSpec& spec, const StageResult& result) {
        if (!provenance.empty()) provenance += ",";
        provenance += stage_name(spec.stage);
        for (const double loss : result.loss_trace) {
          trace << global_step++ << " " << double_to_string(loss) << "\n";
        }
        save_checkpoint(result.params, provenance, config.seed,
                        models_dir /
                            (name + "." + stage_name(spec.stage) + ".ckpt"));
      });
  save_checkpoint(params, provenance, config.seed,
                  models_dir / (name + ".ckpt"));
  atomic_write_file(models_dir / (name + ".trace"), trace.str());
}

}  // namespace

void cmd_train(const RunConfig& config) {
  const PreparedData data = prepare_datasets(config);
  const FeatureTable features = features_from_disk(data, config.jobs);
  const TrainingPools pools =
      build_pools(data.datasets, features, config.corpus, config.seed);

  std::vector<std::string> names;
  for (const DatasetManifest& m : data.datasets) names.push_back(m.name);

  if (config.train.benchmark == BenchmarkMode::kNone) {
    CurriculumPlan plan;
    plan.stages = config.train.stages;
    plan.anchor_dataset = config.train.anchor_dataset;
    write_model_artifacts(config, "model", plan, pools);
    return;
  }

  const InconformityBenchmark bench = make_inconformity_benchmark(
      names, config.train.anchor_index, config.seed, config.train.defaults);
  const auto& plans = config.train.benchmark == BenchmarkMode::kStrategies
                          ? bench.strategies
                          : bench.matrix;
  for (const NamedPlan& plan : plans) {
    write_model_artifacts(config, plan.name, plan.plan, pools);
  }
}

namespace {

json metrics_to_json(const DatasetMetrics& m) {
  json j;
  j["srcc"] = m.srcc;
  j["plcc"] = m.plcc;
  if (m.pairwise_accuracy) j["ranking_acc"] = *m.pairwise_accuracy;
  if (m.ab_accuracy) j["ab_acc"] = *m.ab_accuracy;
  if (m.authenticity_accuracy) j["auth_acc"] = *m.authenticity_accuracy;
  if (m.unparseable_count != 0) j["unparseable"] = m.unparseable_count;
  return j;
}

DatasetMetrics metrics_from_json(const json& j) {
  DatasetMetrics m;
  m.srcc = j.value("srcc", 0.0);
  m.plcc = j.value("plcc", 0.0);
  if (j.contains("ranking_acc")) {
    m.pairwise_accuracy = j.at("ranking_acc").get<double>();
  }
  if (j.contains("ab_acc")) m.ab_accuracy = j.at("ab_acc").get<double>();
  if (j.contains("auth_acc")) {
    m.authenticity_accuracy = j.at("auth_acc").get<double>();
  }
  m.unparseable_count = j.value("unparseable", 0LL);
  return m;
}

std::map<std::string, std::string> load_responses(
    const std::filesystem::path& path) {
  std::map<std::string, std::string> responses;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      responses[f.stem().string()] = read_file(f);
    }
  } else {
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto sep = lines[i].find_first_of(" \t");
      if (sep == std::string::npos) {
        throw ParseError::at_line(
            i + 1, "response file " + path.string() +
                       ": expected '<image id> <response text>'");
      }
      responses[lines[i].substr(0, sep)] = lines[i].substr(sep + 1);
    }
  }
  if (responses.empty()) {
    throw ValidationError("no responses found at " + path.string());
  }
  return responses;
}

}  // namespace

void cmd_eval(const RunConfig& config,
              const std::optional<std::filesystem::path>& responses) {
  const PreparedData data = prepare_datasets(config);
  const FeatureTable features = features_from_disk(data, config.jobs);

  std::vector<const DatasetManifest*> targets;
  for (const DatasetManifest& m : data.datasets) {
    if (config.eval.targets.empty() ||
        std::find(config.eval.targets.begin(), config.eval.targets.end(),
                  m.name) != config.eval.targets.end()) {
      targets.push_back(&m);
    }
  }
  if (targets.empty()) {
    throw ValidationError("eval: no datasets match the configured targets");
  }

  json out;
  out["datasets"] = json::array();
  for (const auto* m : targets) out["datasets"].push_back(m->name);
  out["rows"] = json::array();

  // Latent ground truth, when the generator left sidecars behind.
  std::map<std::string, std::map<std::string, double>> latents;
  for (std::size_t d = 0; d < data.datasets.size(); ++d) {
    const auto sidecar =
        data.base_dirs[d] / (data.datasets[d].name + ".latent");
    if (std::filesystem::exists(sidecar)) {
      latents[data.datasets[d].name] = load_latent_sidecar(sidecar);
    }
  }

  const std::filesystem::path models_dir = config.out_dir / "models";
  std::vector<std::filesystem::path> checkpoints;
  if (std::filesystem::exists(models_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(models_dir)) {
      const auto& p = entry.path();
      // Per-stage snapshots keep their stage suffix; evaluate finals only.
      if (p.extension() == ".ckpt" &&
          p.stem().extension().empty()) {
        checkpoints.push_back(p);
      }
    }
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty() && !responses) {
    throw ValidationError("eval: no checkpoints under " + models_dir.string() +
                          " (run the train command first)");
  }

  for (const auto& ck_path : checkpoints) {
    const Checkpoint ck = load_checkpoint(ck_path);
    json row;
    row["name"] = ck_path.stem().string();
    json cells;
    double srcc_sum = 0.0, plcc_sum = 0.0;
    for (const DatasetManifest* m : targets) {
      DatasetMetrics dm = evaluate_on_dataset(
          ck.params, *m, features, config.eval.test_pairs, config.seed);
      json cell = metrics_to_json(dm);
      const auto lat = latents.find(m->name);
      if (lat != latents.end()) {
        const auto test = split_records(*m, Split::kTest);
        std::vector<double> predictions, latent_truth;
        for (const AnnotatedImage* r : test) {
          const auto it = lat->second.find(r->id);
          if (it == lat->second.end()) continue;
          predictions.push_back(
              score(ck.params, feature_of(features, m->name, r->id)));
          latent_truth.push_back(it->second);
        }
        if (predictions.size() >= 2) {
          cell["latent_srcc"] = srcc(predictions, latent_truth);
        }
      }
      cells[m->name] = cell;
      srcc_sum += dm.srcc;
      plcc_sum += dm.plcc;
    }
    json avg;
    avg["srcc"] = srcc_sum / static_cast<double>(targets.size());
    avg["plcc"] = plcc_sum / static_cast<double>(targets.size());
    cells["average"] = avg;
    row["cells"] = cells;
    out["rows"].push_back(row);
  }

  if (responses) {
    const auto text_by_id = load_responses(*responses);
    json row;
    row["name"] = "external_responses";
    json cells;
    for (const DatasetManifest* m : targets) {
      std::vector<double> predictions, target_mos;
      long long unparseable = 0;
      for (const auto& rec : m->records) {
        const auto it = text_by_id.find(rec.id);
        if (it == text_by_id.end()) continue;
        const auto parsed = parse_score_from_response(it->second);
        if (!parsed) {
          ++unparseable;
          continue;  // counted, never imputed
        }
        predictions.push_back(*parsed);
        target_mos.push_back(*rec.mos);
      }
      if (predictions.empty() && unparseable == 0) continue;
      json cell;
      if (predictions.size() >= 2) {
        DatasetMetrics dm;
        dm.srcc = srcc(predictions, target_mos);
        dm.plcc = plcc(predictions, target_mos);
        dm.unparseable_count = unparseable;
        cell = metrics_to_json(dm);
      } else {
        cell["unparseable"] = unparseable;
      }
      cells[m->name] = cell;
    }
    if (cells.empty()) {
      throw ValidationError(
          "eval: no response matches any record id in the evaluated datasets");
    }
    row["cells"] = cells;
    out["rows"].push_back(row);
  }

  // Indicator-vs-annotation correlations where attribute ratings exist,
  // under both sign conventions (the rating direction is dataset policy).
  json indicator_rows = json::array();
  for (std::size_t d = 0; d < data.datasets.size(); ++d) {
    const DatasetManifest& m = data.datasets[d];
    for (const Metric attr : attribute_metrics()) {
      std::vector<const AnnotatedImage*> with_attr;
      for (const auto& r : m.records) {
        if (r.attributes.count(attr)) with_attr.push_back(&r);
      }
      if (with_attr.size() < 2) continue;
      std::vector<double> estimates, ratings;
      std::vector<IndicatorVector> values(with_attr.size());
      parallel_for(config.jobs, with_attr.size(), [&](std::size_t i) {
        values[i] = compute_indicators(decode_image(
            data.base_dirs[d] / with_attr[i]->image_path));
      });
      for (std::size_t i = 0; i < with_attr.size(); ++i) {
        double v = 0.0;
        switch (attr) {
          case Metric::kBrightness: v = values[i].brightness; break;
          case Metric::kColorfulness: v = values[i].colorfulness; break;
          case Metric::kContrast: v = values[i].contrast; break;
          case Metric::kNoisiness: v = values[i].noisiness; break;
          case Metric::kSharpness: v = values[i].sharpness; break;
          case Metric::kMos: break;
        }
        estimates.push_back(v);
        ratings.push_back(with_attr[i]->attributes.at(attr));
      }
      json entry;
      entry["dataset"] = m.name;
      entry["attribute"] = metric_key(attr);
      const double rho = srcc(estimates, ratings);
      entry["srcc_as_degradation"] = rho;
      entry["srcc_as_quality"] = -rho;
      indicator_rows.push_back(entry);
    }
  }
  if (!indicator_rows.empty()) {
    out["indicator_attribute_correlations"] = indicator_rows;
  }

  atomic_write_file(config.out_dir / "metrics.json", out.dump(2) + "\n");
}

void cmd_report(const RunConfig& config,
                const std::optional<std::filesystem::path>& preferences) {
  const std::filesystem::path metrics_path = config.out_dir / "metrics.json";
  if (!std::filesystem::exists(metrics_path)) {
    throw ValidationError("report: missing " + metrics_path.string() +
                          " (run the eval command first)");
  }
  const json j = json::parse(read_file(metrics_path));

  MetricsReport report;
  report.datasets = j.at("datasets").get<std::vector<std::string>>();
  report.datasets.push_back("average");
  for (const auto& row : j.at("rows")) {
    std::map<std::string, DatasetMetrics> cells;
    for (const auto& [dataset, cell] : row.at("cells").items()) {
      cells[dataset] = metrics_from_json(cell);
    }
    report.rows.emplace_back(row.at("name").get<std::string>(),
                             std::move(cells));
  }

  if (preferences) {
    const json pj = json::parse(read_file(*preferences));
    for (const auto& entry : pj.at("comparisons")) {
      PreferenceCounts counts;
      counts.good = entry.at("good").get<long long>();
      counts.same = entry.at("same").get<long long>();
      counts.bad = entry.at("bad").get<long long>();
      report.side_by_side.emplace_back(entry.at("name").get<std::string>(),
                                       counts);
    }
  }

  atomic_write_file(config.out_dir / "report.md",
                    format_report(report, ReportStyle::kMarkdownTable));
  atomic_write_file(config.out_dir / "report.txt",
                    format_report(report, ReportStyle::kStructured));
}

}  // namespace iqlab
