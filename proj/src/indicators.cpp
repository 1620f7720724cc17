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

#include "iqlab/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace iqlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp01_to_100(double v) { return std::clamp(v, 0.0, 100.0); }

std::vector<double> luma_plane(const ImageBuffer& img) {
  std::vector<double> luma(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      luma[static_cast<std::size_t>(y) * img.width + x] =
          0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
          0.114 * img.at(x, y, 2);
    }
  }
  return luma;
}

struct LumaStats {
  double mean = 0.0;
  double std_dev = 0.0;
  double skewness = 0.0;  // 0 for a constant plane
  double kurtosis = 0.0;  // 0 for a constant plane
};

LumaStats luma_stats(const std::vector<double>& luma) {
  const double n = static_cast<double>(luma.size());
  LumaStats s;
  for (const double v : luma) s.mean += v;
  s.mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const double v : luma) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.std_dev = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skewness = m3 / (s.std_dev * s.std_dev * s.std_dev);
    s.kurtosis = m4 / (m2 * m2);
  }
  return s;
}

double at_clamped(const std::vector<double>& luma, int w, int h, int x,
                  int y) {
  x = std::clamp(x, 0, w - 1);
  y = std::clamp(y, 0, h - 1);
  return luma[static_cast<std::size_t>(y) * w + x];
}

/// Variance of the 3x3 Laplacian response, replicate padding.
double laplacian_variance(const std::vector<double>& luma, int w, int h) {
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> resp(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      resp[static_cast<std::size_t>(y) * w + x] =
          at_clamped(luma, w, h, x - 1, y) + at_clamped(luma, w, h, x + 1, y) +
          at_clamped(luma, w, h, x, y - 1) + at_clamped(luma, w, h, x, y + 1) -
          4.0 * at_clamped(luma, w, h, x, y);
    }
  }
  double mean = 0.0;
  for (const double v : resp) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double v : resp) var += (v - mean) * (v - mean);
  return var / static_cast<double>(n);
}

double hasler_susstrunk(const ImageBuffer& img) {
  const double n =
      static_cast<double>(img.width) * static_cast<double>(img.height);
  double sum_rg = 0.0, sum_yb = 0.0, sum_rg2 = 0.0, sum_yb2 = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double r = img.at(x, y, 0);
      const double g = img.at(x, y, 1);
      const double b = img.at(x, y, 2);
      const double rg = r - g;
      const double yb = 0.5 * (r + g) - b;
      sum_rg += rg;
      sum_yb += yb;
      sum_rg2 += rg * rg;
      sum_yb2 += yb * yb;
    }
  }
  const double mean_rg = sum_rg / n;
  const double mean_yb = sum_yb / n;
  const double var_rg = std::max(0.0, sum_rg2 / n - mean_rg * mean_rg);
  const double var_yb = std::max(0.0, sum_yb2 / n - mean_yb * mean_yb);
  return std::sqrt(var_rg + var_yb) +
         0.3 * std::sqrt(mean_rg * mean_rg + mean_yb * mean_yb);
}

}  // namespace

double immerkaer_sigma(const ImageBuffer& img) {
  const std::vector<double> luma = luma_plane(img);
  const int w = img.width, h = img.height;
  // Valid-region convolution with the noise mask; the (W-2)(H-2)
  // normalization assumes interior positions only.
  double acc = 0.0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      auto l = [&](int dx, int dy) {
        return luma[static_cast<std::size_t>(y + dy) * w + (x + dx)];
      };
      const double v = l(-1, -1) - 2.0 * l(0, -1) + l(1, -1)   //
                       - 2.0 * l(-1, 0) + 4.0 * l(0, 0) - 2.0 * l(1, 0)  //
                       + l(-1, 1) - 2.0 * l(0, 1) + l(1, 1);
      acc += std::abs(v);
    }
  }
  const double denom = 6.0 * static_cast<double>(w - 2) *
                       static_cast<double>(h - 2);
  return std::sqrt(kPi / 2.0) * acc / denom;
}

IndicatorVector compute_indicators(const ImageBuffer& img) {
  const std::vector<double> luma = luma_plane(img);
  const LumaStats stats = luma_stats(luma);

  IndicatorVector out;
  out.brightness = clamp01_to_100(stats.mean * (100.0 / 255.0));
  out.colorfulness = clamp01_to_100(hasler_susstrunk(img) / 109.0 * 100.0);
  out.contrast = clamp01_to_100(stats.std_dev * (100.0 / 127.5));
  out.noisiness = clamp01_to_100(immerkaer_sigma(img) / 30.0 * 100.0);
  const double lap_var = laplacian_variance(luma, img.width, img.height);
  out.sharpness = clamp01_to_100(std::log10(1.0 + lap_var) / 4.0 * 100.0);
  return out;
}

FeatureVector extract_features(const ImageBuffer& img) {
  const IndicatorVector ind = compute_indicators(img);
  const std::vector<double> luma = luma_plane(img);
  const LumaStats stats = luma_stats(luma);
  const int w = img.width, h = img.height;

  // 8-bin histogram entropy over luma, bits.
  std::array<double, 8> hist{};
  for (const double v : luma) {
    const int bin = std::min(7, static_cast<int>(v / 32.0));
    hist[static_cast<std::size_t>(bin)] += 1.0;
  }
  double entropy = 0.0;
  const double n = static_cast<double>(luma.size());
  for (const double c : hist) {
    if (c > 0.0) {
      const double p = c / n;
      entropy -= p * std::log2(p);
    }
  }

  // Mean gradient magnitude, central differences with replicate padding.
  double grad_sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (at_clamped(luma, w, h, x + 1, y) -
                               at_clamped(luma, w, h, x - 1, y));
      const double gy = 0.5 * (at_clamped(luma, w, h, x, y + 1) -
                               at_clamped(luma, w, h, x, y - 1));
      grad_sum += std::sqrt(gx * gx + gy * gy);
    }
  }
  const double mean_grad = grad_sum / n;

  FeatureVector f{};
  for (int i = 0; i < 5; ++i) f[static_cast<std::size_t>(i)] = ind[i] / 100.0;
  f[5] = stats.mean / 255.0;
  f[6] = stats.std_dev / 255.0;
  f[7] = stats.skewness / (1.0 + std::abs(stats.skewness));
  f[8] = stats.kurtosis / (1.0 + stats.kurtosis);
  f[9] = entropy / 3.0;
  f[10] = mean_grad / 255.0;
  f[11] = 1.0;
  return f;
}

}  // namespace iqlab
