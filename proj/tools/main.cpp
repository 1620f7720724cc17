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

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "iqlab/error.hpp"
#include "iqlab/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out_dir;
};

iqlab::RunConfig resolve_config(const GlobalArgs& args) {
  iqlab::RunConfig config = args.config_path.empty()
                                ? iqlab::default_run_config()
                                : iqlab::load_run_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (args.jobs) config.jobs = *args.jobs;
  if (args.out_dir) config.out_dir = *args.out_dir;
  if (config.jobs < 1) {
    throw iqlab::ValidationError("--jobs must be >= 1");
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "iqlab: desk-scale image-quality assessment pipeline\n"
      "Builds rating corpora, trains a small scorer through a staged\n"
      "curriculum, and evaluates with rank-correlation metrics."};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs args;
  app.add_option("--config", args.config_path,
                 "Run configuration file (JSON); defaults to the built-in "
                 "synthetic benchmark");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the run seed");
  int jobs_value = 1;
  auto* jobs_opt =
      app.add_option("--jobs", jobs_value, "Worker threads for data-parallel "
                                           "sections");
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "Output directory");

  bool empirical_range = false;
  std::string responses_path;
  std::string preferences_path;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic suite");
  auto* ingest = app.add_subcommand(
      "ingest", "Validate, normalize and split dataset manifests");
  ingest->add_flag("--empirical-range", empirical_range,
                   "Normalize with the observed min/max instead of the "
                   "declared range");
  auto* corpus =
      app.add_subcommand("build-corpus", "Write dialogue corpora + sidecars");
  auto* indicators = app.add_subcommand(
      "indicators", "Dump the five indicator estimates per image");
  auto* train =
      app.add_subcommand("train", "Run the training curriculum, write "
                                  "checkpoints");
  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints on held-out "
                                          "splits, write metrics.json");
  eval->add_option("--responses", responses_path,
                   "External free-text responses: a file of '<id> <text>' "
                   "lines or a directory of <id>.txt files");
  auto* report =
      app.add_subcommand("report", "Render metrics.json as tables");
  report->add_option("--preferences", preferences_path,
                     "JSON file of side-by-side preference counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (seed_opt->count() > 0) args.seed = seed_value;
    if (jobs_opt->count() > 0) args.jobs = jobs_value;
    if (out_opt->count() > 0) args.out_dir = out_value;
    const iqlab::RunConfig config = resolve_config(args);

    if (synth->parsed()) {
      iqlab::cmd_synth(config);
    } else if (ingest->parsed()) {
      iqlab::cmd_ingest(config, empirical_range);
    } else if (corpus->parsed()) {
      iqlab::cmd_build_corpus(config);
    } else if (indicators->parsed()) {
      iqlab::cmd_indicators(config);
    } else if (train->parsed()) {
      iqlab::cmd_train(config);
    } else if (eval->parsed()) {
      iqlab::cmd_eval(config,
                      responses_path.empty()
                          ? std::nullopt
                          : std::optional<std::filesystem::path>(
                                responses_path));
    } else if (report->parsed()) {
      iqlab::cmd_report(config,
                        preferences_path.empty()
                            ? std::nullopt
                            : std::optional<std::filesystem::path>(
                                  preferences_path));
    }
  } catch (const iqlab::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
