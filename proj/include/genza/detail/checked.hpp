#pragma once

#include <cstdint>
#include <initializer_list>

#include "genza/error.hpp"

namespace genza::detail {

// Exact unsigned arithmetic for cost counting. Anything that would wrap is
// rejected instead of silently producing a bogus cost.

inline std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw ValidationError("cost", "operator cost exceeds the representable range");
  }
  return r;
}

inline std::uint64_t mul(std::initializer_list<std::uint64_t> xs) {
  std::uint64_t r = 1;
  for (auto x : xs) r = mul(r, x);
  return r;
}

inline std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) {
    throw ValidationError("cost", "operator cost exceeds the representable range");
  }
  return r;
}

inline std::uint64_t add(std::initializer_list<std::uint64_t> xs) {
  std::uint64_t r = 0;
  for (auto x : xs) r = add(r, x);
  return r;
}

// Element count times bits-per-element, converted to bytes. Keeps int4 exact.
inline double bits_to_bytes(std::uint64_t elements, std::uint64_t bits_per_element) {
  return static_cast<double>(mul(elements, bits_per_element)) / 8.0;
}

}  // namespace genza::detail
