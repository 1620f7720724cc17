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

#ifndef IQLAB_SYNTH_HPP_
#define IQLAB_SYNTH_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "iqlab/image.hpp"
#include "iqlab/ingest.hpp"
#include "iqlab/ranker.hpp"

namespace iqlab {

/// One degradation level: Gaussian noise sigma plus box-blur width.
struct DegradeLevel {
  double noise_sigma = 0.0;
  int blur_width = 1;
};

/// Shared latent design for every dataset in a suite. The grid is ordered
/// from mildest to harshest; latent quality of level i is 1 - i/(L-1).
struct LatentSpec {
  int n_images = 200;
  int image_size = 64;
  std::vector<DegradeLevel> degradation_grid;
  std::uint64_t seed = 0;
};

/// Ten levels with noise sigma and blur width both non-decreasing, so the
/// indicator features carry a monotone severity signal.
std::vector<DegradeLevel> default_degradation_grid();

enum class WarpKind { kIdentity, kAffine, kPower, kLogistic };

/// A strictly increasing map of latent quality in [0,1] to an annotation
/// scale, modelling one dataset's rating protocol:
///   identity  x
///   affine    p1*x + p2/100            (slope p1 > 0, offset in rating units)
///   power     x^p1                     (p1 > 0)
///   logistic  normalized sigmoid(p1*(x-1/2))  (steepness p1 > 0)
/// noise_sd is additive annotation noise in rating units.
struct WarpSpec {
  WarpKind kind = WarpKind::kIdentity;
  double p1 = 0.0;
  double p2 = 0.0;
  double noise_sd = 0.0;
};

const char* warp_kind_name(WarpKind k);
void validate_warp(const WarpSpec& w);
double apply_warp(const WarpSpec& w, double x);

/// The default inconformity family: identity, affine(0.6, 20), power(2),
/// logistic(8), each with noise_sd 3.
std::vector<WarpSpec> default_warps();

struct SyntheticDataset {
  DatasetManifest manifest;
  std::map<std::string, double> latent;       // hidden ground truth
  std::map<std::string, ImageBuffer> images;  // keyed by record id
};

/// One dataset per warp. Images are procedural textures (a smooth
/// value-noise family standing in for photographs, a sinusoidal
/// interference family standing in for generated images) degraded per the
/// grid; annotations are warp(latent)*100 + noise clamped to [0,100].
/// Each dataset also gets a mild content regime of its own (texture scale,
/// base brightness, contrast span), mirroring how real rating corpora
/// differ in subject matter as well as in rating protocol.
/// Deterministic under (spec, warps, seed), including under --jobs
/// parallelism.
std::vector<SyntheticDataset> generate_synthetic_suite(
    const LatentSpec& spec, const std::vector<WarpSpec>& warps,
    std::uint64_t seed, int jobs = 1);

/// Writes manifest, images and the hidden-latent sidecar under `dir`.
void save_synthetic_dataset(const SyntheticDataset& ds,
                            const std::filesystem::path& dir);

std::map<std::string, double> load_latent_sidecar(
    const std::filesystem::path& path);

struct NamedPlan {
  std::string name;
  CurriculumPlan plan;
};

struct TrainDefaults {
  int relativity_steps = 2000;
  int multifunctional_steps = 1000;
  int refinement_steps = 200;
  int batch_size = 32;
  double relativity_lr = 0.05;
  double multifunctional_lr = 0.02;
  double refinement_lr = 0.002;
};

/// The four training strategies of the inconformity ablation plus the
/// source->target plan matrix. `datasets` lists every dataset id in suite
/// order; `anchor_index` selects the internally consistent dataset used for
/// absolute calibration in the *_single strategies.
struct InconformityBenchmark {
  std::vector<NamedPlan> strategies;  // joint, single, relat_joint, relat_single
  std::vector<NamedPlan> matrix;      // one per source dataset
  std::string anchor;
};

InconformityBenchmark make_inconformity_benchmark(
    const std::vector<std::string>& datasets, int anchor_index,
    std::uint64_t seed, const TrainDefaults& defaults = TrainDefaults{});

}  // namespace iqlab

#endif  // IQLAB_SYNTH_HPP_
