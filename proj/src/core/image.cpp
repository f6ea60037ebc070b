#include "core/image.hpp"

#include <numeric>

namespace splatprint {

ImageBuffer::ImageBuffer(int w, int h, double r, double g, double b)
    : width(w), height(h), pixels(3 * static_cast<size_t>(w) * h) {
  for (size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
}

size_t BitMask::count() const {
  return std::accumulate(bits.begin(), bits.end(), size_t{0});
}

}  // namespace splatprint
