// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gspn {

void write_pgm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& pixels) {
  if (static_cast<int64_t>(pixels.size()) != width * height) {
    throw std::invalid_argument("pgm pixel count does not match dimensions");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "P5\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!os) throw std::runtime_error("pgm write failed: " + path);
}

std::vector<uint8_t> quantize_min_max(const std::vector<double>& values) {
  std::vector<uint8_t> out(values.size(), 0);
  if (values.empty()) return out;
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) return out;
  const double scale = 255.0 / (hi - lo);
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<uint8_t>(std::lround((values[i] - lo) * scale));
  }
  return out;
}

}  // namespace gspn
