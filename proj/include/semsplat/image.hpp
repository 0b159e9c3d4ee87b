// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace semsplat {

/// Interleaved H x W x C buffer of doubles, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

  std::size_t pixel_count() const { return std::size_t(width) * height; }
  std::size_t offset(int x, int y, int c = 0) const {
    return (std::size_t(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[offset(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[offset(x, y, c)]; }
  std::span<double> pixel(std::size_t p) {
    return {data.data() + p * channels, std::size_t(channels)};
  }
  std::span<const double> pixel(std::size_t p) const {
    return {data.data() + p * channels, std::size_t(channels)};
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool empty() const { return data.empty(); }
};

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int w, int h, int fill = 0) : width(w), height(h), labels(std::size_t(w) * h, fill) {}
  int& at(int x, int y) { return labels[std::size_t(y) * width + x]; }
  int at(int x, int y) const { return labels[std::size_t(y) * width + x]; }
  std::size_t pixel_count() const { return labels.size(); }
};

/// Per-pixel boolean; true means "set".
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h, bool fill = false) : width(w), height(h), bits(std::size_t(w) * h, fill ? 1 : 0) {}
  bool at(int x, int y) const { return bits[std::size_t(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[std::size_t(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
};

/// Rounds through binary32 so that values survive f32 file formats bit-exactly.
inline double to_f32_exact(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace semsplat
