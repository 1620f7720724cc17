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

#ifndef IQLAB_IMAGE_HPP_
#define IQLAB_IMAGE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace iqlab {

/// 8-bit RGB image, row-major. Minimum size 3x3 (the smallest extent the
/// 3x3 indicator convolutions are defined on).
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width*height*3

  std::uint8_t& at(int x, int y, int c) {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
};

/// Allocates a width x height RGB buffer filled with `fill`.
ImageBuffer make_image(int width, int height, std::uint8_t fill = 0);

/// Decodes a PNG (8-bit gray / gray+alpha / RGB / RGBA, non-interlaced) or
/// binary PPM (P6, maxval 255) file. Grayscale is replicated across the
/// three channels; alpha is discarded.
ImageBuffer decode_image(const std::filesystem::path& path);

ImageBuffer decode_image_bytes(const std::string& bytes,
                               const std::string& origin);

std::string encode_ppm(const ImageBuffer& img);
std::string encode_png(const ImageBuffer& img);

void write_image(const ImageBuffer& img, const std::filesystem::path& path);

enum class Degradation { kGaussianNoise, kBoxBlur };

/// kGaussianNoise: adds seeded i.i.d. noise with standard deviation
/// `magnitude` per channel, rounded and clamped to [0,255].
/// kBoxBlur: normalized square kernel of odd width `magnitude`,
/// edge-replicated. Width 1 (and sigma 0) return the input unchanged.
ImageBuffer degrade(const ImageBuffer& img, Degradation kind, double magnitude,
                    std::uint64_t seed);

}  // namespace iqlab

#endif  // IQLAB_IMAGE_HPP_
