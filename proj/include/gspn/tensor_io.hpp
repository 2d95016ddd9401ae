// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
//
// "GSPN-T" tensor container:
//   bytes 0-3   magic 0x47 0x53 0x50 0x4E ("GSPN")
//   byte  4     version, 0x01
//   byte  5     dtype: 0x00 = f32, 0x01 = f64
//   bytes 6-7   reserved, zero
//   bytes 8-23  four little-endian u32 dims (B, C, H, W)
//   bytes 24-   row-major little-endian payload, W fastest
//
// Round trips are bit-exact for both dtypes.

#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "gspn/tensor.hpp"

namespace gspn {

using TensorVariant = std::variant<Tensor4<float>, Tensor4<double>>;

void save(const Tensor4<float>& t, std::ostream& sink);
void save(const Tensor4<double>& t, std::ostream& sink);
TensorVariant load(std::istream& source);

// Widening convenience: loads either dtype and returns f64 values.
Tensor4<double> load_f64(std::istream& source);

void save_file(const Tensor4<double>& t, const std::string& path);
void save_file(const Tensor4<float>& t, const std::string& path);
TensorVariant load_file(const std::string& path);
Tensor4<double> load_file_f64(const std::string& path);

}  // namespace gspn
