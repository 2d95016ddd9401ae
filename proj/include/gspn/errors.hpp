// Copyright 2026 The gspn authors. Apache 2.0 license; see LICENSE.
#pragma once

#include <stdexcept>
#include <string>

namespace gspn {

// Shape/dimension contract violations (mismatched operands, invalid configs).
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Allocation request whose index arithmetic would overflow.
class AllocError : public std::length_error {
 public:
  explicit AllocError(const std::string& what) : std::length_error(what) {}
};

// Malformed tensor stream. `kind()` distinguishes the failure modes so
// callers (and tests) do not have to parse the message.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kBadVersion, kBadDtype, kBadHeader, kTruncated };

  ParseError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Request exceeding the dense-oracle size guard.
class ScaleGuardError : public std::runtime_error {
 public:
  explicit ScaleGuardError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gspn
