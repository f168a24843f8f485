#pragma once

#include <string>
#include <vector>

#include "mclrf/geometry.hpp"

namespace mclrf {

// Row-major RGB image, channels in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // 3 * width * height

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(3) * w * h, 0.0) {}

  std::size_t offset(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * width + x);
  }
  Vec3 at(int x, int y) const {
    const std::size_t o = offset(x, y);
    return Vec3(data[o], data[o + 1], data[o + 2]);
  }
  void set(int x, int y, const Vec3& c) {
    const std::size_t o = offset(x, y);
    data[o] = c.x();
    data[o + 1] = c.y();
    data[o + 2] = c.z();
  }
};

// Area average over non-overlapping blocks; r must be the reciprocal of an
// integer dividing both dimensions. r = 1 returns the input unchanged.
Image downscale(const Image& img, double r);

// Binary PPM (P6), 8 bits per channel; values clamped to [0,1] and rounded
// half-up to [0,255].
void write_ppm(const Image& img, const std::string& path);
std::string ppm_bytes(const Image& img);
Image read_ppm(const std::string& path);

}  // namespace mclrf
