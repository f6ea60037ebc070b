#pragma once

#include <cstdint>
#include <vector>

namespace splatprint {

// Row-major RGB image, channels in [0,1].
struct ImageBuffer {
  int width = 0, height = 0;
  std::vector<double> pixels;  // 3 * width * height, interleaved RGB

  ImageBuffer() = default;
  ImageBuffer(int w, int h, double r = 0.0, double g = 0.0, double b = 0.0);

  double* at(int x, int y) { return &pixels[3 * (static_cast<size_t>(y) * width + x)]; }
  const double* at(int x, int y) const {
    return &pixels[3 * (static_cast<size_t>(y) * width + x)];
  }
  size_t channel_count() const { return pixels.size(); }
};

struct BitMask {
  int width = 0, height = 0;
  std::vector<uint8_t> bits;  // 0 or 1, row-major

  BitMask() = default;
  BitMask(int w, int h, uint8_t fill = 0)
      : width(w), height(h), bits(static_cast<size_t>(w) * h, fill) {}

  bool get(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  size_t count() const;
};

}  // namespace splatprint
