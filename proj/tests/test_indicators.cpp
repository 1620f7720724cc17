#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "iqlab/image.hpp"
#include "iqlab/indicators.hpp"
#include "iqlab/rng.hpp"

using namespace iqlab;

TEST_CASE("uniform mid-gray: zero chroma, zero contrast, zero sharpness") {
  const ImageBuffer gray = make_image(16, 16, 128);
  const IndicatorVector v = compute_indicators(gray);
  CHECK(v.colorfulness == 0.0);
  CHECK(v.contrast == 0.0);
  CHECK(v.sharpness == 0.0);
  CHECK(v.noisiness == 0.0);
}

TEST_CASE("uniform white: brightness saturates the scale") {
  const ImageBuffer white = make_image(16, 16, 255);
  CHECK(compute_indicators(white).brightness == doctest::Approx(100.0));
}

TEST_CASE("noisiness pin: sigma-10 noise on mid-gray") {
  // Expected values computed with an independent numpy implementation of the
  // Immerkaer estimate on this exact pixel array (per-channel noise measured
  // on the luma plane shrinks sigma by sqrt(.299^2+.587^2+.114^2) ~ 0.669).
  const ImageBuffer base = make_image(64, 64, 128);
  const ImageBuffer noisy =
      degrade(base, Degradation::kGaussianNoise, 10.0, 4242);
  CHECK(immerkaer_sigma(noisy) ==
        doctest::Approx(6.408699465883701).epsilon(0.01));
  CHECK(compute_indicators(noisy).noisiness ==
        doctest::Approx(21.362331552945673).epsilon(0.01));
}

TEST_CASE("colorfulness/brightness/contrast pins on a fixed pattern") {
  ImageBuffer pat = make_image(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      pat.at(x, y, 0) = static_cast<std::uint8_t>(100 + (x * 5 + y * 3) % 40);
      pat.at(x, y, 1) = static_cast<std::uint8_t>(110 + (x * 7) % 30);
      pat.at(x, y, 2) = static_cast<std::uint8_t>(105 + (y * 11) % 35);
    }
  }
  // Expected values from an independent numpy evaluation of the formulas.
  const IndicatorVector v = compute_indicators(pat);
  CHECK(v.colorfulness == doctest::Approx(17.666029101685528).epsilon(1e-9));
  CHECK(v.brightness == doctest::Approx(47.791666666666664).epsilon(1e-9));
  CHECK(v.contrast == doctest::Approx(5.57985919560966).epsilon(1e-9));
}

TEST_CASE("brightness equivariance: +k shifts by 100k/255") {
  const ImageBuffer img = fixtures::make_texture(11, 32);
  const double before = compute_indicators(img).brightness;
  ImageBuffer shifted = img;
  bool clamped = false;
  for (auto& p : shifted.pixels) {
    if (p > 235) clamped = true;
    p = static_cast<std::uint8_t>(p + 20);
  }
  REQUIRE(!clamped);  // pre-clamp regime
  const double after = compute_indicators(shifted).brightness;
  CHECK(after - before == doctest::Approx(20.0 * 100.0 / 255.0).epsilon(1e-9));
}

TEST_CASE("noisiness is strictly increasing in noise sigma") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ImageBuffer base = fixtures::make_texture(seed);
    double prev = -1.0;
    for (const double sigma : {0.0, 5.0, 10.0, 20.0}) {
      const ImageBuffer noisy =
          degrade(base, Degradation::kGaussianNoise, sigma, 77 + seed);
      const double n = compute_indicators(noisy).noisiness;
      CHECK(n > prev);
      prev = n;
    }
  }
}

TEST_CASE("sharpness is strictly decreasing in blur width") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ImageBuffer base = fixtures::make_texture(seed);
    double prev = 1e9;
    for (const double width : {1.0, 3.0, 5.0, 9.0}) {
      const ImageBuffer blurred =
          degrade(base, Degradation::kBoxBlur, width, 0);
      const double s = compute_indicators(blurred).sharpness;
      CHECK(s < prev);
      prev = s;
    }
  }
}

TEST_CASE("all indicators stay in [0,100] on random buffers") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 3 + static_cast<int>(rng.uniform_int(40));
    const int h = 3 + static_cast<int>(rng.uniform_int(40));
    ImageBuffer img = make_image(w, h);
    for (auto& p : img.pixels) {
      p = static_cast<std::uint8_t>(rng.uniform_int(256));
    }
    const IndicatorVector v = compute_indicators(img);
    for (int i = 0; i < 5; ++i) {
      CHECK(v[i] >= 0.0);
      CHECK(v[i] <= 100.0);
      CHECK(std::isfinite(v[i]));
    }
  }
}

TEST_CASE("indicators are stable under interior cropping") {
  // Stationary texture: a 4-pixel crop of a 128x128 image moves every
  // indicator by less than 1% (relative, with a small absolute floor).
  const ImageBuffer img = fixtures::make_texture(5, 128, /*smooth=*/false);
  ImageBuffer crop = make_image(120, 120);
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 120; ++x) {
      for (int c = 0; c < 3; ++c) {
        crop.at(x, y, c) = img.at(x + 4, y + 4, c);
      }
    }
  }
  const IndicatorVector a = compute_indicators(img);
  const IndicatorVector b = compute_indicators(crop);
  for (int i = 0; i < 5; ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    CHECK(std::abs(a[i] - b[i]) / denom < 0.01);
  }
}

TEST_CASE("features: uniform image degenerates to zeros") {
  const ImageBuffer flat = make_image(12, 12, 200);
  const FeatureVector f = extract_features(flat);
  CHECK(f[6] == 0.0);   // luma std
  CHECK(f[7] == 0.0);   // skewness (constant convention)
  CHECK(f[8] == 0.0);   // kurtosis (constant convention)
  CHECK(f[9] == 0.0);   // entropy of a single bin
  CHECK(f[10] == 0.0);  // gradient
  CHECK(f[11] == 1.0);  // bias
  CHECK(f[5] == doctest::Approx(200.0 / 255.0));
}

TEST_CASE("features: checkerboard entropy is exactly one bit") {
  const ImageBuffer board = fixtures::checkerboard(64);
  const FeatureVector f = extract_features(board);
  // Two occupied bins at probability 1/2 each: entropy 1 bit, scaled by 1/3.
  CHECK(f[9] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("features are deterministic and finite") {
  const ImageBuffer img = fixtures::make_texture(21, 48);
  const FeatureVector a = extract_features(img);
  const FeatureVector b = extract_features(img);
  CHECK(a == b);
  for (const double v : a) CHECK(std::isfinite(v));
}
