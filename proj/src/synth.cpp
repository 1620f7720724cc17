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

#include "iqlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "iqlab/error.hpp"
#include "iqlab/rng.hpp"
#include "iqlab/util.hpp"

namespace iqlab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Mild per-dataset content regime: texture scale, base brightness and
/// contrast span. Datasets share the degradation-to-quality law but not
/// their subject matter, like real rating corpora.
struct ContentRegime {
  int lattice;       // value-noise cells per axis
  double base_luma;  // texture mid level
  double amplitude;  // texture swing
  double base_freq;  // sinusoid cycles per image
};

ContentRegime regime_for(std::size_t dataset_index) {
  static constexpr ContentRegime kRegimes[] = {
      {3, 105.0, 60.0, 2.0},
      {6, 125.0, 85.0, 5.0},
      {10, 145.0, 105.0, 10.0},
      {16, 165.0, 125.0, 18.0},
  };
  return kRegimes[dataset_index % 4];
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// The two families sit on opposite sides of the regime's base level so they
// stay separable (in brightness at least) under every degradation level.
constexpr double kFamilyLumaOffset = 28.0;

/// Smooth value-noise blobs; the photographic stand-in family.
ImageBuffer value_noise_texture(int size, const ContentRegime& regime,
                                Rng& rng) {
  const int g = regime.lattice;
  const double center = regime.base_luma - kFamilyLumaOffset;
  std::vector<double> lattice(static_cast<std::size_t>(g + 1) * (g + 1) * 3);
  for (int y = 0; y <= g; ++y) {
    for (int x = 0; x <= g; ++x) {
      const double shared = rng.uniform(-1.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double jitter = rng.uniform(-1.0, 1.0);
        lattice[(static_cast<std::size_t>(y) * (g + 1) + x) * 3 + c] =
            center + 0.55 * regime.amplitude * shared + 24.0 * jitter;
      }
    }
  }
  ImageBuffer img = make_image(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double gx = static_cast<double>(x) * g / size;
      const double gy = static_cast<double>(y) * g / size;
      const int ix = std::min(g - 1, static_cast<int>(gx));
      const int iy = std::min(g - 1, static_cast<int>(gy));
      const double tx = smoothstep(gx - ix);
      const double ty = smoothstep(gy - iy);
      for (int c = 0; c < 3; ++c) {
        auto l = [&](int xx, int yy) {
          return lattice[(static_cast<std::size_t>(yy) * (g + 1) + xx) * 3 +
                         c];
        };
        const double top = l(ix, iy) * (1.0 - tx) + l(ix + 1, iy) * tx;
        const double bot = l(ix, iy + 1) * (1.0 - tx) + l(ix + 1, iy + 1) * tx;
        img.at(x, y, c) = to_byte(top * (1.0 - ty) + bot * ty);
      }
    }
  }
  return img;
}

/// Crossed plane waves; the generated stand-in family. High-frequency
/// structure keeps the two families apart in sharpness and contrast.
ImageBuffer interference_texture(int size, const ContentRegime& regime,
                                 Rng& rng) {
  const double f1 = regime.base_freq * (1.0 + rng.uniform());
  const double f2 = regime.base_freq * (1.5 + rng.uniform());
  const double theta1 = rng.uniform(0.0, kTwoPi);
  const double theta2 = rng.uniform(0.0, kTwoPi);
  const double phase1 = rng.uniform(0.0, kTwoPi);
  const double phase2 = rng.uniform(0.0, kTwoPi);
  const double c1 = std::cos(theta1), s1 = std::sin(theta1);
  const double c2 = std::cos(theta2), s2 = std::sin(theta2);

  ImageBuffer img = make_image(size, size);
  const double center = regime.base_luma + kFamilyLumaOffset;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u1 = kTwoPi * f1 * (x * c1 + y * s1) / size + phase1;
      const double u2 = kTwoPi * f2 * (x * c2 + y * s2) / size + phase2;
      for (int c = 0; c < 3; ++c) {
        const double chroma_shift = 0.35 * c;
        const double v = center + 0.3 * regime.amplitude *
                                      (std::sin(u1 + chroma_shift) +
                                       std::sin(u2 - chroma_shift));
        img.at(x, y, c) = to_byte(v);
      }
    }
  }
  return img;
}

std::string image_id(int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "img_" + digits;
}

void validate_latent_spec(const LatentSpec& spec) {
  if (spec.n_images < 20) {
    throw ValidationError("synthetic suite: n_images must be >= 20");
  }
  if (spec.image_size < 8) {
    throw ValidationError("synthetic suite: image_size must be >= 8");
  }
  if (spec.degradation_grid.size() < 2) {
    throw ValidationError(
        "synthetic suite: degradation grid needs at least 2 levels");
  }
  std::set<std::pair<double, int>> seen;
  for (const DegradeLevel& lvl : spec.degradation_grid) {
    if (!(lvl.noise_sigma >= 0.0)) {
      throw ValidationError("synthetic suite: noise sigma must be >= 0");
    }
    if (lvl.blur_width < 1 || lvl.blur_width % 2 == 0) {
      throw ValidationError(
          "synthetic suite: blur width must be an odd integer >= 1");
    }
    if (!seen.insert({lvl.noise_sigma, lvl.blur_width}).second) {
      throw ValidationError("synthetic suite: degradation levels must be "
                            "distinct");
    }
  }
}

}  // namespace

std::vector<DegradeLevel> default_degradation_grid() {
  return {{0.0, 1}, {2.0, 1}, {4.0, 3}, {6.0, 3}, {9.0, 3},
          {12.0, 5}, {16.0, 5}, {20.0, 5}, {25.0, 7}, {30.0, 9}};
}

const char* warp_kind_name(WarpKind k) {
  switch (k) {
    case WarpKind::kIdentity: return "identity";
    case WarpKind::kAffine: return "affine";
    case WarpKind::kPower: return "power";
    case WarpKind::kLogistic: return "logistic";
  }
  return "identity";
}

void validate_warp(const WarpSpec& w) {
  if (!(w.noise_sd >= 0.0)) {
    throw ValidationError("warp: noise_sd must be >= 0");
  }
  switch (w.kind) {
    case WarpKind::kIdentity:
      break;
    case WarpKind::kAffine:
      if (!(w.p1 > 0.0)) {
        throw ValidationError("warp: affine slope must be > 0");
      }
      break;
    case WarpKind::kPower:
      if (!(w.p1 > 0.0)) {
        throw ValidationError("warp: power exponent must be > 0");
      }
      break;
    case WarpKind::kLogistic:
      if (!(w.p1 > 0.0)) {
        throw ValidationError("warp: logistic steepness must be > 0");
      }
      break;
  }
}

double apply_warp(const WarpSpec& w, double x) {
  switch (w.kind) {
    case WarpKind::kIdentity:
      return x;
    case WarpKind::kAffine:
      return w.p1 * x + w.p2 / 100.0;
    case WarpKind::kPower:
      return std::pow(x, w.p1);
    case WarpKind::kLogistic: {
      // Rescaled so the endpoints map to exactly 0 and 1; strictly
      // increasing for any steepness.
      const double lo = sigmoid(-0.5 * w.p1);
      const double hi = sigmoid(0.5 * w.p1);
      return (sigmoid(w.p1 * (x - 0.5)) - lo) / (hi - lo);
    }
  }
  return x;
}

std::vector<WarpSpec> default_warps() {
  return {
      {WarpKind::kIdentity, 0.0, 0.0, 3.0},
      {WarpKind::kAffine, 0.6, 20.0, 3.0},
      {WarpKind::kPower, 2.0, 0.0, 3.0},
      {WarpKind::kLogistic, 8.0, 0.0, 3.0},
  };
}

std::vector<SyntheticDataset> generate_synthetic_suite(
    const LatentSpec& spec, const std::vector<WarpSpec>& warps,
    std::uint64_t seed, int jobs) {
  validate_latent_spec(spec);
  if (warps.size() < 2) {
    throw ValidationError(
        "synthetic suite: need at least 2 warps (one per dataset)");
  }
  for (const WarpSpec& w : warps) validate_warp(w);

  const std::uint64_t suite_seed = mix_seed(seed, spec.seed);
  const std::size_t levels = spec.degradation_grid.size();

  std::vector<SyntheticDataset> suite(warps.size());
  for (std::size_t d = 0; d < warps.size(); ++d) {
    SyntheticDataset& ds = suite[d];
    const std::string name =
        "d" + std::to_string(d) + "_" + warp_kind_name(warps[d].kind);
    ds.manifest.name = name;
    ds.manifest.kind = DatasetKind::kPhotographicWild;
    ds.manifest.score_range = ScoreRange{0.0, 100.0};

    const std::uint64_t dataset_seed = mix_seed(suite_seed, d);
    const ContentRegime regime = regime_for(d);

    std::vector<AnnotatedImage> records(
        static_cast<std::size_t>(spec.n_images));
    std::vector<ImageBuffer> images(static_cast<std::size_t>(spec.n_images));
    std::vector<double> latents(static_cast<std::size_t>(spec.n_images));

    parallel_for(jobs, static_cast<std::size_t>(spec.n_images),
                 [&](std::size_t j) {
      const std::uint64_t img_seed = mix_seed(dataset_seed, j);
      const bool photographic = j % 2 == 0;
      const std::size_t level = (j / 2) % levels;
      const DegradeLevel& lvl = spec.degradation_grid[level];
      const double latent =
          1.0 - static_cast<double>(level) /
                    static_cast<double>(levels - 1);

      Rng texture_rng(mix_seed(img_seed, 1));
      ImageBuffer img =
          photographic
              ? value_noise_texture(spec.image_size, regime, texture_rng)
              : interference_texture(spec.image_size, regime, texture_rng);
      img = degrade(img, Degradation::kBoxBlur,
                    static_cast<double>(lvl.blur_width), 0);
      img = degrade(img, Degradation::kGaussianNoise, lvl.noise_sigma,
                    mix_seed(img_seed, 2));

      Rng annot_rng(mix_seed(img_seed, 3));
      double annotation = apply_warp(warps[d], latent) * 100.0;
      if (warps[d].noise_sd > 0.0) {
        annotation += warps[d].noise_sd * annot_rng.normal();
      }
      annotation = std::clamp(annotation, 0.0, 100.0);

      AnnotatedImage rec;
      rec.id = image_id(static_cast<int>(j));
      rec.dataset_id = name;
      rec.image_path = "images/" + name + "/" + rec.id + ".ppm";
      rec.mos_raw = annotation;
      rec.authentic = photographic;
      records[j] = std::move(rec);
      images[j] = std::move(img);
      latents[j] = latent;
    });

    for (std::size_t j = 0; j < records.size(); ++j) {
      ds.latent[records[j].id] = latents[j];
      ds.images[records[j].id] = std::move(images[j]);
      ds.manifest.records.push_back(std::move(records[j]));
    }
  }
  return suite;
}

void save_synthetic_dataset(const SyntheticDataset& ds,
                            const std::filesystem::path& dir) {
  save_manifest(ds.manifest, dir / (ds.manifest.name + ".manifest"));
  for (const auto& rec : ds.manifest.records) {
    const auto it = ds.images.find(rec.id);
    if (it == ds.images.end()) {
      throw ValidationError("synthetic dataset '" + ds.manifest.name +
                            "': no image for record '" + rec.id + "'");
    }
    write_image(it->second, dir / rec.image_path);
  }
  std::ostringstream sidecar;
  for (const auto& [id, latent] : ds.latent) {
    sidecar << id << " " << double_to_string(latent) << "\n";
  }
  atomic_write_file(dir / (ds.manifest.name + ".latent"), sidecar.str());
}

std::map<std::string, double> load_latent_sidecar(
    const std::filesystem::path& path) {
  std::map<std::string, double> out;
  const auto lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto tokens = split_ws(lines[i]);
    if (tokens.size() != 2) {
      throw ParseError::at_line(i + 1, "latent sidecar " + path.string() +
                                           ": expected 'id value'");
    }
    out[std::string(tokens[0])] = parse_double(tokens[1], "latent value");
  }
  return out;
}

InconformityBenchmark make_inconformity_benchmark(
    const std::vector<std::string>& datasets, int anchor_index,
    std::uint64_t seed, const TrainDefaults& defaults) {
  if (datasets.size() < 2) {
    throw ValidationError("inconformity benchmark needs >= 2 datasets");
  }
  if (anchor_index < 0 ||
      static_cast<std::size_t>(anchor_index) >= datasets.size()) {
    throw ValidationError("anchor index " + std::to_string(anchor_index) +
                          " out of range for " +
                          std::to_string(datasets.size()) + " datasets");
  }
  const std::string anchor = datasets[static_cast<std::size_t>(anchor_index)];
  const std::vector<std::string> all = datasets;

  auto relativity_stage = [&](std::uint64_t tag) {
    StageSpec s;
    s.stage = StageId::kRelativity;
    s.tasks = {TaskId::kRelativity};
    s.dataset_ids = all;
    s.steps = defaults.relativity_steps;
    s.batch_size = defaults.batch_size;
    s.learning_rate = defaults.relativity_lr;
    s.seed = mix_seed(seed, tag);
    return s;
  };
  auto multifunctional_stage = [&](const std::vector<std::string>& ds,
                                   std::uint64_t tag) {
    StageSpec s;
    s.stage = StageId::kMultifunctional;
    s.tasks = {TaskId::kQuant, TaskId::kAuthenticity};
    s.dataset_ids = ds;
    s.steps = defaults.multifunctional_steps;
    s.batch_size = defaults.batch_size;
    s.learning_rate = defaults.multifunctional_lr;
    s.seed = mix_seed(seed, tag + 1);
    return s;
  };
  // Refinement revisits the tasks of the earlier stages at low learning
  // rate; relativity pairs keep coming from every dataset while the
  // absolute tasks stay on the stage-2 datasets.
  auto refinement_stage = [&](const std::vector<std::string>& quant_ds,
                              bool with_relativity, std::uint64_t tag) {
    StageSpec s;
    s.stage = StageId::kRefinement;
    s.tasks = {TaskId::kQuant, TaskId::kAuthenticity};
    s.dataset_ids = quant_ds;
    if (with_relativity) {
      s.tasks.insert(TaskId::kRelativity);
      s.task_datasets[TaskId::kRelativity] = all;
    }
    s.steps = defaults.refinement_steps;
    s.batch_size = defaults.batch_size;
    s.learning_rate = defaults.refinement_lr;
    s.seed = mix_seed(seed, tag + 2);
    return s;
  };

  InconformityBenchmark bench;
  bench.anchor = anchor;

  {
    CurriculumPlan plan;
    plan.anchor_dataset = anchor;
    plan.stages = {multifunctional_stage(all, 10),
                   refinement_stage(all, false, 10)};
    bench.strategies.push_back({"multifunc_joint", std::move(plan)});
  }
  {
    CurriculumPlan plan;
    plan.anchor_dataset = anchor;
    plan.stages = {multifunctional_stage({anchor}, 20),
                   refinement_stage({anchor}, false, 20)};
    bench.strategies.push_back({"multifunc_single", std::move(plan)});
  }
  {
    CurriculumPlan plan;
    plan.anchor_dataset = anchor;
    plan.stages = {relativity_stage(30), multifunctional_stage(all, 30),
                   refinement_stage(all, true, 30)};
    bench.strategies.push_back({"relat_multifunc_joint", std::move(plan)});
  }
  {
    CurriculumPlan plan;
    plan.anchor_dataset = anchor;
    plan.stages = {relativity_stage(40), multifunctional_stage({anchor}, 40),
                   refinement_stage({anchor}, true, 40)};
    bench.strategies.push_back({"relat_multifunc_single", std::move(plan)});
  }

  for (std::size_t s = 0; s < datasets.size(); ++s) {
    CurriculumPlan plan;
    plan.anchor_dataset = datasets[s];
    const std::uint64_t tag = 100 + 10 * s;
    plan.stages = {relativity_stage(tag),
                   multifunctional_stage({datasets[s]}, tag),
                   refinement_stage({datasets[s]}, true, tag)};
    bench.matrix.push_back({"source_" + datasets[s], std::move(plan)});
  }
  return bench;
}

}  // namespace iqlab
