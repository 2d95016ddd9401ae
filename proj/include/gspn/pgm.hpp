// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gspn {

// Binary PGM (P5, maxval 255), row-major bytes.
void write_pgm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& pixels);

// Min-max normalizes values to [0, 255]; a constant image maps to all zeros.
std::vector<uint8_t> quantize_min_max(const std::vector<double>& values);

}  // namespace gspn
