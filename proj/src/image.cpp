#include "mclrf/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mclrf {

Image downscale(const Image& img, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("downscale: scale must be in (0, 1]");
  const int d = static_cast<int>(std::lround(1.0 / r));
  if (std::abs(1.0 / r - d) > 1e-9)
    throw std::invalid_argument("downscale: scale must be the reciprocal of an integer");
  if (d == 1) return img;
  if (img.width % d != 0 || img.height % d != 0)
    throw std::invalid_argument("downscale: divisor must divide both image dimensions");

  Image out(img.width / d, img.height / d);
  const double inv = 1.0 / (static_cast<double>(d) * d);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      Vec3 acc = Vec3::Zero();
      for (int by = 0; by < d; ++by)
        for (int bx = 0; bx < d; ++bx) acc += img.at(x * d + bx, y * d + by);
      out.set(x, y, acc * inv);
    }
  }
  return out;
}

namespace {
unsigned char quantize(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
}
}  // namespace

std::string ppm_bytes(const Image& img) {
  std::ostringstream out;
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (double v : img.data) out.put(static_cast<char>(quantize(v)));
  return out.str();
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const std::string bytes = ppm_bytes(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error(path + ": not a binary PPM (P6)");

  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error(path + ": truncated PPM header");
  };
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0) throw std::runtime_error(path + ": bad PPM dimensions");
  if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 supported");
  in.get();  // single whitespace after maxval

  Image img(w, h);
  std::vector<unsigned char> raw(static_cast<std::size_t>(3) * w * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw std::runtime_error(path + ": truncated PPM payload");
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

}  // namespace mclrf
