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

#ifndef IQLAB_INDICATORS_HPP_
#define IQLAB_INDICATORS_HPP_

#include <array>

#include "iqlab/image.hpp"

namespace iqlab {

/// Classical no-reference estimates of the five perceptual attributes,
/// each mapped to [0,100]:
///  - brightness: mean Rec.601 luma, scaled by 100/255
///  - colorfulness: Hasler-Susstrunk statistic, clamped at the published
///    "extremely colorful" anchor of 109
///  - contrast: RMS contrast (luma std) scaled by 100/127.5
///  - noisiness: Immerkaer fast noise-variance estimate, sigma 30 saturates
///  - sharpness: log-compressed variance of the 3x3 Laplacian response
/// noisiness and sharpness report degradation magnitude and detail strength
/// respectively; whether human attribute ratings run in the same direction
/// is dataset-dependent, so evaluation reports both sign conventions.
struct IndicatorVector {
  double brightness = 0.0;
  double colorfulness = 0.0;
  double contrast = 0.0;
  double noisiness = 0.0;
  double sharpness = 0.0;

  double operator[](int i) const {
    switch (i) {
      case 0: return brightness;
      case 1: return colorfulness;
      case 2: return contrast;
      case 3: return noisiness;
      default: return sharpness;
    }
  }
};

IndicatorVector compute_indicators(const ImageBuffer& img);

/// Raw Immerkaer noise-sigma estimate (before the [0,100] mapping).
double immerkaer_sigma(const ImageBuffer& img);

inline constexpr int kFeatureCount = 12;

/// Fixed-length feature vector feeding the trainable scorer:
/// [0..4]  the five indicators / 100
/// [5]     luma mean / 255
/// [6]     luma std / 255
/// [7]     luma skewness squashed to (-1,1) via x/(1+|x|)
/// [8]     luma kurtosis squashed to [0,1) via k/(1+k)
/// [9]     8-bin luma histogram entropy / 3
/// [10]    mean gradient magnitude / 255 (central differences)
/// [11]    constant 1 (bias feature)
/// Skewness and kurtosis of a constant image are defined as 0.
using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector extract_features(const ImageBuffer& img);

}  // namespace iqlab

#endif  // IQLAB_INDICATORS_HPP_
