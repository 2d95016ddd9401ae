// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.

#include "gspn/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace gspn {
namespace {

constexpr unsigned char kMagic[4] = {0x47, 0x53, 0x50, 0x4E};
constexpr unsigned char kVersion = 0x01;

static_assert(std::endian::native == std::endian::little,
              "payload serialization assumes a little-endian host");

void put_u32_le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32_le(const unsigned char* b) {
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

template <typename T>
void save_impl(const Tensor4<T>& t, std::ostream& sink) {
  const Dims4 d = t.dims();
  for (int64_t v : {d.b, d.c, d.h, d.w}) {
    if (v > static_cast<int64_t>(UINT32_MAX)) {
      throw AllocError("dims " + d.str() + " exceed the u32 header fields");
    }
  }
  sink.write(reinterpret_cast<const char*>(kMagic), 4);
  sink.put(static_cast<char>(kVersion));
  sink.put(static_cast<char>(dtype_of<T>::value));
  sink.put(0);
  sink.put(0);
  put_u32_le(sink, static_cast<uint32_t>(d.b));
  put_u32_le(sink, static_cast<uint32_t>(d.c));
  put_u32_le(sink, static_cast<uint32_t>(d.h));
  put_u32_le(sink, static_cast<uint32_t>(d.w));
  sink.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * static_cast<int64_t>(sizeof(T))));
  if (!sink) throw std::runtime_error("tensor write failed");
}

template <typename T>
Tensor4<T> load_payload(std::istream& source, const Dims4& dims) {
  Tensor4<T> t(dims);
  source.read(reinterpret_cast<char*>(t.data()),
              static_cast<std::streamsize>(t.size() * static_cast<int64_t>(sizeof(T))));
  if (source.gcount() != t.size() * static_cast<int64_t>(sizeof(T))) {
    throw ParseError(ParseError::Kind::kTruncated,
                     "payload shorter than header dims " + dims.str() + " require");
  }
  return t;
}

}  // namespace

void save(const Tensor4<float>& t, std::ostream& sink) { save_impl(t, sink); }
void save(const Tensor4<double>& t, std::ostream& sink) { save_impl(t, sink); }

TensorVariant load(std::istream& source) {
  unsigned char header[24];
  source.read(reinterpret_cast<char*>(header), 24);
  if (source.gcount() != 24) {
    throw ParseError(ParseError::Kind::kTruncated, "stream shorter than the 24-byte header");
  }
  if (std::memcmp(header, kMagic, 4) != 0) {
    throw ParseError(ParseError::Kind::kBadMagic, "bad magic, not a GSPN-T stream");
  }
  if (header[4] != kVersion) {
    throw ParseError(ParseError::Kind::kBadVersion,
                     "unknown version " + std::to_string(header[4]));
  }
  if (header[6] != 0 || header[7] != 0) {
    throw ParseError(ParseError::Kind::kBadHeader, "reserved header bytes are nonzero");
  }
  Dims4 dims{static_cast<int64_t>(get_u32_le(header + 8)),
             static_cast<int64_t>(get_u32_le(header + 12)),
             static_cast<int64_t>(get_u32_le(header + 16)),
             static_cast<int64_t>(get_u32_le(header + 20))};
  switch (header[5]) {
    case 0x00:
      return load_payload<float>(source, dims);
    case 0x01:
      return load_payload<double>(source, dims);
    default:
      throw ParseError(ParseError::Kind::kBadDtype,
                       "unknown dtype byte " + std::to_string(header[5]));
  }
}

Tensor4<double> load_f64(std::istream& source) {
  TensorVariant v = load(source);
  if (auto* t = std::get_if<Tensor4<double>>(&v)) return std::move(*t);
  const auto& f = std::get<Tensor4<float>>(v);
  Tensor4<double> t(f.dims());
  for (int64_t i = 0; i < f.size(); ++i) t[i] = static_cast<double>(f[i]);
  return t;
}

namespace {
std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}
}  // namespace

void save_file(const Tensor4<double>& t, const std::string& path) {
  auto os = open_out(path);
  save(t, os);
}

void save_file(const Tensor4<float>& t, const std::string& path) {
  auto os = open_out(path);
  save(t, os);
}

TensorVariant load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load(is);
}

Tensor4<double> load_file_f64(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_f64(is);
}

}  // namespace gspn
