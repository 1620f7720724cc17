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

#include "iqlab/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "iqlab/error.hpp"
#include "iqlab/rng.hpp"
#include "iqlab/util.hpp"

namespace iqlab {

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                            '\r', '\n', 0x1a, '\n'};

std::uint32_t read_u32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void check_dims(int width, int height, const std::string& origin) {
  if (width < 3 || height < 3) {
    throw ValidationError(origin + ": image is " + std::to_string(width) +
                          "x" + std::to_string(height) +
                          ", minimum supported size is 3x3");
  }
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

ImageBuffer decode_png(const std::string& bytes, const std::string& origin) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 8 + 25 || std::memcmp(data, kPngSignature, 8) != 0) {
    throw ValidationError(origin + ": truncated PNG header");
  }

  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  int src_channels = 0;
  bool saw_ihdr = false, saw_iend = false;
  std::string idat;

  std::size_t pos = 8;
  while (pos + 12 <= size) {
    const std::uint32_t len = read_u32(data + pos);
    const std::string type(bytes, pos + 4, 4);
    if (pos + 12 + len > size) {
      throw ValidationError(origin + ": truncated PNG chunk '" + type + "'");
    }
    const unsigned char* payload = data + pos + 8;
    const std::uint32_t stored_crc = read_u32(payload + len);
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, data + pos + 4, len + 4);
    if (crc != stored_crc) {
      throw ValidationError(origin + ": PNG chunk CRC mismatch in '" + type +
                            "'");
    }

    if (type == "IHDR") {
      if (len != 13) throw ValidationError(origin + ": bad IHDR length");
      width = static_cast<int>(read_u32(payload));
      height = static_cast<int>(read_u32(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      const int interlace = payload[12];
      if (bit_depth != 8) {
        throw ValidationError(origin + ": unsupported PNG bit depth " +
                              std::to_string(bit_depth) + " (only 8 is supported)");
      }
      switch (color_type) {
        case 0: src_channels = 1; break;
        case 2: src_channels = 3; break;
        case 4: src_channels = 2; break;
        case 6: src_channels = 4; break;
        default:
          throw ValidationError(origin + ": unsupported PNG color type " +
                                std::to_string(color_type));
      }
      if (interlace != 0) {
        throw ValidationError(origin + ": interlaced PNG is not supported");
      }
      saw_ihdr = true;
    } else if (type == "IDAT") {
      idat.append(bytes, pos + 8, len);
    } else if (type == "IEND") {
      saw_iend = true;
      break;
    }
    // Ancillary chunks are skipped.
    pos += 12 + len;
  }
  if (!saw_ihdr) throw ValidationError(origin + ": missing IHDR");
  if (!saw_iend) throw ValidationError(origin + ": missing IEND");
  if (idat.empty()) throw ValidationError(origin + ": missing IDAT");
  check_dims(width, height, origin);

  const std::size_t row_bytes =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(src_channels);
  const std::size_t raw_size =
      (row_bytes + 1) * static_cast<std::size_t>(height);
  std::vector<unsigned char> raw(raw_size);
  uLongf dest_len = static_cast<uLongf>(raw_size);
  const int zres =
      uncompress(raw.data(), &dest_len,
                 reinterpret_cast<const Bytef*>(idat.data()),
                 static_cast<uLong>(idat.size()));
  if (zres != Z_OK || dest_len != raw_size) {
    throw ValidationError(origin + ": PNG image data fails to inflate");
  }

  // Undo per-scanline filters in place.
  const int bpp = src_channels;  // bytes per pixel at depth 8
  std::vector<unsigned char> prev(row_bytes, 0);
  std::vector<unsigned char> cur(row_bytes);
  ImageBuffer img = make_image(width, height);
  for (int y = 0; y < height; ++y) {
    const unsigned char* src = raw.data() + static_cast<std::size_t>(y) *
                                                (row_bytes + 1);
    const int filter = src[0];
    std::memcpy(cur.data(), src + 1, row_bytes);
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int left = i >= static_cast<std::size_t>(bpp)
                           ? cur[i - static_cast<std::size_t>(bpp)]
                           : 0;
      const int up = prev[i];
      const int upleft = i >= static_cast<std::size_t>(bpp)
                             ? prev[i - static_cast<std::size_t>(bpp)]
                             : 0;
      int v = cur[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) / 2; break;
        case 4: v += paeth(left, up, upleft); break;
        default:
          throw ValidationError(origin + ": invalid PNG filter type " +
                                std::to_string(filter));
      }
      cur[i] = static_cast<unsigned char>(v & 0xff);
    }
    for (int x = 0; x < width; ++x) {
      const unsigned char* px =
          cur.data() + static_cast<std::size_t>(x) * bpp;
      std::uint8_t r, g, b;
      if (src_channels <= 2) {
        r = g = b = px[0];
      } else {
        r = px[0];
        g = px[1];
        b = px[2];
      }
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
    prev.swap(cur);
  }
  return img;
}

ImageBuffer decode_ppm(const std::string& bytes, const std::string& origin) {
  std::size_t pos = 2;  // past "P6"
  auto skip_space = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(
                 static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      }
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      return;
    }
  };
  auto read_int = [&](const char* field) {
    skip_space();
    std::size_t start = pos;
    while (pos < bytes.size() &&
           std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    }
    if (pos == start) {
      throw ValidationError(origin + ": malformed PPM header (" + field + ")");
    }
    return static_cast<int>(
        parse_int(std::string_view(bytes).substr(start, pos - start), field));
  };

  const int width = read_int("width");
  const int height = read_int("height");
  const int maxval = read_int("maxval");
  if (maxval != 255) {
    throw ValidationError(origin + ": unsupported PPM maxval " +
                          std::to_string(maxval) + " (only 255 is supported)");
  }
  if (pos >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ValidationError(origin + ": malformed PPM header");
  }
  ++pos;  // single whitespace before raster
  check_dims(width, height, origin);
  const std::size_t need = static_cast<std::size_t>(width) *
                           static_cast<std::size_t>(height) * 3;
  if (bytes.size() - pos < need) {
    throw ValidationError(origin + ": truncated PPM raster (need " +
                          std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - pos) + ")");
  }
  ImageBuffer img = make_image(width, height);
  std::memcpy(img.pixels.data(), bytes.data() + pos, need);
  return img;
}

}  // namespace

ImageBuffer make_image(int width, int height, std::uint8_t fill) {
  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<std::size_t>(width) *
                        static_cast<std::size_t>(height) * 3,
                    fill);
  return img;
}

ImageBuffer decode_image_bytes(const std::string& bytes,
                               const std::string& origin) {
  if (bytes.size() >= 8 &&
      std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
    return decode_png(bytes, origin);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return decode_ppm(bytes, origin);
  }
  throw ValidationError(origin +
                        ": unsupported image format (expected PNG or P6 PPM)");
}

ImageBuffer decode_image(const std::filesystem::path& path) {
  return decode_image_bytes(read_file(path), path.string());
}

std::string encode_ppm(const ImageBuffer& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()),
             img.pixels.size());
  return out;
}

std::string encode_png(const ImageBuffer& img) {
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * 3;
  std::vector<unsigned char> raw((row_bytes + 1) *
                                 static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    unsigned char* dst = raw.data() + static_cast<std::size_t>(y) *
                                          (row_bytes + 1);
    dst[0] = 0;  // filter: none
    std::memcpy(dst + 1,
                img.pixels.data() + static_cast<std::size_t>(y) * row_bytes,
                row_bytes);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(),
                static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION) !=
      Z_OK) {
    throw IoError("PNG compression failed");
  }

  std::string out(reinterpret_cast<const char*>(kPngSignature), 8);
  auto chunk = [&out](const char type[5], const std::string& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.append(type, 4);
    out.append(payload);
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                static_cast<uInt>(out.size() - crc_start));
    put_u32(out, crc);
  };

  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  chunk("IHDR", ihdr);
  chunk("IDAT", std::string(reinterpret_cast<const char*>(compressed.data()),
                            bound));
  chunk("IEND", "");
  return out;
}

void write_image(const ImageBuffer& img, const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png") {
    atomic_write_file(path, encode_png(img));
  } else {
    atomic_write_file(path, encode_ppm(img));
  }
}

ImageBuffer degrade(const ImageBuffer& img, Degradation kind, double magnitude,
                    std::uint64_t seed) {
  if (kind == Degradation::kGaussianNoise) {
    if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
      throw ValidationError("degrade: noise sigma must be finite and >= 0");
    }
    if (magnitude == 0.0) return img;
    ImageBuffer out = img;
    Rng rng(seed);
    for (auto& p : out.pixels) {
      const double v =
          std::lround(static_cast<double>(p) + magnitude * rng.normal());
      p = static_cast<std::uint8_t>(std::clamp<double>(v, 0.0, 255.0));
    }
    return out;
  }

  // Box blur: magnitude is an odd integer kernel width >= 1.
  const double w = magnitude;
  if (!(w >= 1.0) || w != std::floor(w) ||
      (static_cast<long long>(w) % 2) != 1) {
    throw ValidationError("degrade: box blur width must be an odd integer >= 1");
  }
  const int width = static_cast<int>(w);
  if (width == 1) return img;
  const int r = width / 2;
  const int W = img.width, H = img.height;

  // Separable pass with replicate padding; intermediate kept in double so the
  // result matches the full 2D kernel exactly.
  std::vector<double> horiz(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = std::clamp(x + dx, 0, W - 1);
          acc += img.at(xx, y, c);
        }
        horiz[static_cast<std::size_t>((y * W + x) * 3 + c)] = acc;
      }
    }
  }
  ImageBuffer out = make_image(W, H);
  const double norm = 1.0 / (static_cast<double>(width) * width);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = std::clamp(y + dy, 0, H - 1);
          acc += horiz[static_cast<std::size_t>((yy * W + x) * 3 + c)];
        }
        const double v = std::lround(acc * norm);
        out.at(x, y, c) =
            static_cast<std::uint8_t>(std::clamp<double>(v, 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace iqlab
