// Shared test fixtures.
#ifndef IQLAB_TESTS_FIXTURES_HPP_
#define IQLAB_TESTS_FIXTURES_HPP_

#include <cstdint>

#include "iqlab/image.hpp"
#include "iqlab/rng.hpp"

namespace fixtures {

/// Mild seeded texture: mid-gray plus bounded random detail. When smoothed
/// (one 3x3 blur) the Laplacian response stays off the sharpness
/// indicator's saturation point; the raw variant is maximally stationary
/// for the crop-invariance property.
inline iqlab::ImageBuffer make_texture(std::uint64_t seed, int size = 64,
                                       bool smooth = true) {
  iqlab::Rng rng(seed);
  iqlab::ImageBuffer img = iqlab::make_image(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = 128.0 + rng.uniform(-30.0, 30.0) +
                         20.0 * ((x + y + c) % 3 - 1);
        img.at(x, y, c) = static_cast<std::uint8_t>(
            v < 0 ? 0 : (v > 255 ? 255 : v));
      }
    }
  }
  if (!smooth) return img;
  return iqlab::degrade(img, iqlab::Degradation::kBoxBlur, 3.0, 0);
}

inline iqlab::ImageBuffer checkerboard(int size, int cell = 1) {
  iqlab::ImageBuffer img = iqlab::make_image(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::uint8_t v = ((x / cell + y / cell) % 2) ? 255 : 0;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
    }
  }
  return img;
}

}  // namespace fixtures

#endif  // IQLAB_TESTS_FIXTURES_HPP_
