#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "iqlab/error.hpp"
#include "iqlab/pipeline.hpp"
#include "iqlab/util.hpp"

using namespace iqlab;

namespace {

namespace fs = std::filesystem;

/// Small, fast run: 2 datasets x 24 images x 16px, short stages.
RunConfig tiny_config(const fs::path& out) {
  RunConfig config = default_run_config();
  config.seed = 7;
  config.out_dir = out;
  config.synth->latent.n_images = 24;
  config.synth->latent.image_size = 16;
  config.synth->latent.degradation_grid = {
      {0.0, 1}, {4.0, 1}, {9.0, 3}, {16.0, 3}, {25.0, 5}, {30.0, 7}};
  config.synth->warps = {{WarpKind::kIdentity, 0, 0, 2.0},
                         {WarpKind::kPower, 2.0, 0, 2.0}};
  config.corpus.pairs_per_record = 4;
  config.train.hidden_size = 8;
  config.train.defaults.relativity_steps = 60;
  config.train.defaults.multifunctional_steps = 40;
  config.train.defaults.refinement_steps = 10;
  config.eval.test_pairs = 40;
  return config;
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      out[fs::relative(entry.path(), root).string()] =
          read_file(entry.path());
    }
  }
  return out;
}

void run_default_pipeline(const RunConfig& config) {
  cmd_synth(config);
  cmd_train(config);
  cmd_eval(config);
  cmd_report(config);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IQLAB_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("run config parsing") {
  const RunConfig defaults = default_run_config();
  CHECK(defaults.synth.has_value());
  CHECK(defaults.synth->warps.size() == 4);
  CHECK(defaults.synth->latent.n_images == 200);
  CHECK(defaults.train.benchmark == BenchmarkMode::kStrategies);

  const RunConfig parsed = parse_run_config(R"({
    "seed": 11,
    "jobs": 2,
    "out_dir": "elsewhere",
    "source": {"synth": {"n_images": 48, "image_size": 24,
                          "warps": [{"kind": "identity", "noise_sd": 1.0},
                                    {"kind": "power", "p1": 3.0}]}},
    "split": {"train_fraction": 0.75},
    "corpus": {"pairs_per_record": 5},
    "train": {"hidden_size": 8, "anchor_index": 1},
    "eval": {"test_pairs": 10}
  })",
                                            "test");
  CHECK(parsed.seed == 11);
  CHECK(parsed.jobs == 2);
  CHECK(parsed.out_dir == fs::path("elsewhere"));
  CHECK(parsed.synth->latent.n_images == 48);
  CHECK(parsed.synth->warps.size() == 2);
  CHECK(parsed.synth->warps[1].p1 == 3.0);
  CHECK(parsed.split.train_fraction == 0.75);
  CHECK(parsed.corpus.pairs_per_record == 5);
  CHECK(parsed.train.anchor_index == 1);
  CHECK(parsed.eval.test_pairs == 10);

  CHECK_THROWS_AS(parse_run_config("{ not json", "test"), ValidationError);
  CHECK_THROWS_AS(parse_run_config(R"({"source": {}})", "test"),
                  ValidationError);
  CHECK_THROWS_AS(
      parse_run_config(
          R"({"source": {"synth": {}, "manifests": ["x"]}})", "test"),
      ValidationError);
  CHECK_THROWS_AS(
      parse_run_config(R"({"train": {"benchmark": "none"}})", "test"),
      ValidationError);
}

TEST_CASE("default pipeline produces artifacts and is byte-reproducible") {
  const fs::path base = fs::temp_directory_path() / "iqlab_pipe";
  fs::remove_all(base);

  RunConfig run_a = tiny_config(base / "a");
  run_default_pipeline(run_a);

  CHECK(fs::exists(base / "a/data/d0_identity.manifest"));
  CHECK(fs::exists(base / "a/data/d1_power.latent"));
  CHECK(fs::exists(base / "a/models/multifunc_joint.ckpt"));
  CHECK(fs::exists(base / "a/models/relat_multifunc_single.ckpt"));
  CHECK(fs::exists(base / "a/metrics.json"));
  CHECK(fs::exists(base / "a/report.md"));
  CHECK(fs::exists(base / "a/report.txt"));

  const std::string report = read_file(base / "a/report.md");
  for (const char* row : {"multifunc_joint", "multifunc_single",
                          "relat_multifunc_joint", "relat_multifunc_single"}) {
    CHECK(report.find(row) != std::string::npos);
  }
  CHECK(report.find("average") != std::string::npos);

  // Same config, fresh directory: byte-identical tree.
  RunConfig run_b = tiny_config(base / "b");
  run_default_pipeline(run_b);
  const auto tree_a = snapshot_tree(base / "a");
  const auto tree_b = snapshot_tree(base / "b");
  REQUIRE(tree_a.size() == tree_b.size());
  for (const auto& [rel, bytes] : tree_a) {
    REQUIRE(tree_b.count(rel) == 1);
    CHECK(tree_b.at(rel) == bytes);
  }

  // Re-running in place is idempotent.
  run_default_pipeline(run_a);
  const auto tree_a2 = snapshot_tree(base / "a");
  CHECK(tree_a2 == tree_a);
  fs::remove_all(base);
}

TEST_CASE("parallel jobs do not change any artifact byte") {
  const fs::path base = fs::temp_directory_path() / "iqlab_jobs";
  fs::remove_all(base);
  RunConfig serial = tiny_config(base / "serial");
  run_default_pipeline(serial);
  RunConfig parallel = tiny_config(base / "parallel");
  parallel.jobs = 4;
  run_default_pipeline(parallel);
  CHECK(snapshot_tree(base / "serial") == snapshot_tree(base / "parallel"));
  fs::remove_all(base);
}

TEST_CASE("ingest + build-corpus + indicators artifacts") {
  const fs::path base = fs::temp_directory_path() / "iqlab_cmds";
  fs::remove_all(base);
  RunConfig config = tiny_config(base);
  cmd_synth(config);
  cmd_ingest(config);
  CHECK(fs::exists(base / "normalized/d0_identity.manifest"));
  const DatasetManifest normalized =
      load_manifest(base / "normalized/d0_identity.manifest");
  CHECK(normalized.normalized());
  CHECK(normalized.train_count() + normalized.test_count() ==
        normalized.records.size());
  CHECK(normalized.train_count() == 19);  // round(0.8 * 24)

  cmd_build_corpus(config);
  CHECK(fs::exists(base / "corpus/d0_identity_relativity_mos.txt"));
  CHECK(fs::exists(base / "corpus/d0_identity_quant_mos.sidecar.jsonl"));
  CHECK(fs::exists(base / "corpus/d0_identity_describe.txt"));
  CHECK(fs::exists(base / "corpus/d0_identity_authenticity.txt"));
  const auto entries =
      load_corpus(base / "corpus/d0_identity_relativity_mos.txt",
                  base / "corpus/d0_identity_relativity_mos.sidecar.jsonl");
  for (const auto& e : entries) {
    CHECK(e.sample.task == TaskId::kRelativity);
    CHECK(e.dataset_id == "d0_identity");
  }

  cmd_indicators(config);
  const std::string dump = read_file(base / "indicators.txt");
  CHECK(dump.find("d0_identity/img_0000 brightness=") != std::string::npos);
  CHECK(dump.find("noisiness=") != std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("eval scores external free-text responses and counts unparseables") {
  const fs::path base = fs::temp_directory_path() / "iqlab_resp";
  fs::remove_all(base);
  RunConfig config = tiny_config(base);
  cmd_synth(config);
  cmd_train(config);

  // Five responses for d0 records, one of them unparseable.
  const std::string responses =
      "img_0000\tThe quality score is 81.\n"
      "img_0001\tI rate this 64.\n"
      "img_0002\tquality: 47.5 overall\n"
      "img_0003\tI cannot judge this image.\n"
      "img_0004\tscore 12\n";
  atomic_write_file(base / "responses.txt", responses);
  cmd_eval(config, base / "responses.txt");

  const std::string metrics = read_file(base / "metrics.json");
  CHECK(metrics.find("external_responses") != std::string::npos);
  CHECK(metrics.find("\"unparseable\": 1") != std::string::npos);
  cmd_report(config);
  CHECK(read_file(base / "report.txt").find("unparseable=1") !=
        std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("report renders side-by-side preference scores") {
  const fs::path base = fs::temp_directory_path() / "iqlab_sbs";
  fs::remove_all(base);
  RunConfig config = tiny_config(base);
  cmd_synth(config);
  cmd_train(config);
  cmd_eval(config);
  atomic_write_file(base / "prefs.json",
                    R"({"comparisons": [
                      {"name": "vs_baseline", "good": 45, "same": 33, "bad": 22}
                    ]})");
  cmd_report(config, base / "prefs.json");
  const std::string report = read_file(base / "report.md");
  CHECK(report.find("vs_baseline") != std::string::npos);
  CHECK(report.find("1.42") != std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("commands fail cleanly without upstream artifacts") {
  const fs::path base = fs::temp_directory_path() / "iqlab_missing";
  fs::remove_all(base);
  RunConfig config = tiny_config(base);
  CHECK_THROWS_WITH_AS(cmd_train(config), doctest::Contains("synth"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(cmd_report(config), doctest::Contains("metrics.json"),
                       ValidationError);
  // Nothing was written on the failed attempts.
  CHECK(!fs::exists(base / "models"));
  CHECK(!fs::exists(base / "report.md"));
  fs::remove_all(base);
}

TEST_CASE("external manifests flow through prepare_datasets") {
  const fs::path base = fs::temp_directory_path() / "iqlab_ext";
  fs::remove_all(base);
  fs::create_directories(base / "data");
  atomic_write_file(base / "data/ext.manifest",
                    "manifest name=ext kind=photographic_wild score_min=1 "
                    "score_max=5\n"
                    "a imgs/a.ppm 1\n"
                    "b imgs/b.ppm 2\n"
                    "c imgs/c.ppm 3\n"
                    "d imgs/d.ppm 5\n");
  RunConfig config;
  config.out_dir = base / "out";
  config.synth.reset();
  config.manifests = {base / "data/ext.manifest"};
  config.split.train_fraction = 0.5;
  config.seed = 3;

  const PreparedData prepared = prepare_datasets(config);
  REQUIRE(prepared.datasets.size() == 1);
  CHECK(prepared.datasets[0].normalized());
  CHECK(prepared.datasets[0].train_count() == 2);
  CHECK(prepared.base_dirs[0] == base / "data");
  fs::remove_all(base);
}

TEST_CASE("CLI exit codes: 1 usage, 2 validation, 0 success") {
  const fs::path base = fs::temp_directory_path() / "iqlab_cli";
  fs::remove_all(base);
  CHECK(run_cli("definitely-not-a-command") == 1);
  CHECK(run_cli("") == 1);

  // Validation failure: train before synth.
  fs::create_directories(base);
  CHECK(run_cli("train --out " + (base / "none").string()) == 2);

  // Malformed manifest: validation exit with a diagnostic.
  atomic_write_file(base / "bad.manifest", "not a manifest\n");
  atomic_write_file(base / "config.json",
                    std::string("{\"source\": {\"manifests\": [\"") +
                        (base / "bad.manifest").string() +
                        "\"]}, \"out_dir\": \"" + (base / "out").string() +
                        "\"}");
  CHECK(run_cli("ingest --config " + (base / "config.json").string()) == 2);

  CHECK(run_cli("--help") == 0);
  fs::remove_all(base);
}
