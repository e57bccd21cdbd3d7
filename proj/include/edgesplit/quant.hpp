#pragma once

// Bottleneck tensor quantization for transmission.
//
//   32 bit: raw IEEE-754 single, scale = 1, zero_point = 0
//   16 bit: IEEE-754 half precision, round to nearest even (scale/zero unused)
//    8 bit: per-tensor affine min-max, code = round((v - min) / scale),
//           scale = (max - min) / 255, zero_point = min
//
// Codes are packed big-endian so the payload can go on the wire unchanged.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "edgesplit/error.hpp"
#include "edgesplit/profiles.hpp"

namespace edgesplit {

struct BottleneckTensor {
  TensorShape dims;
  std::vector<float> values;
  std::uint32_t camera_index = 0;

  std::uint64_t element_count() const noexcept { return dims.elements(); }

  friend bool operator==(const BottleneckTensor&, const BottleneckTensor&) = default;
};

struct QuantizedTensor {
  TensorShape dims;
  int bits = 32;
  float scale = 1.0f;
  float zero_point = 0.0f;
  std::vector<std::uint8_t> codes;

  std::uint64_t element_count() const noexcept { return dims.elements(); }

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

// ---------------------------------------------------------------------------
// half precision

// float -> binary16, round to nearest even. Overflow produces infinity.
inline std::uint16_t float_to_half(float f) noexcept {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t exp = (x >> 23) & 0xFFu;
  const std::uint32_t mant = x & 0x7FFFFFu;

  if (exp == 0xFF) return static_cast<std::uint16_t>(sign | 0x7C00u | (mant ? 0x200u : 0u));

  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 31) return static_cast<std::uint16_t>(sign | 0x7C00u);

  if (e <= 0) {
    // subnormal half (or zero); float subnormals are far below half range
    if (exp == 0) return static_cast<std::uint16_t>(sign);
    const std::uint32_t m = mant | 0x800000u;
    const int shift = 14 - e;
    if (shift >= 32) return static_cast<std::uint16_t>(sign);
    std::uint32_t h = m >> shift;
    const std::uint32_t rem = m & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
  }

  std::uint32_t h = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // may carry into the exponent
  return static_cast<std::uint16_t>(sign | h);
}

inline float half_to_float(std::uint16_t h) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1Fu;
  std::uint32_t mant = h & 0x3FFu;

  if (exp == 0x1F) return std::bit_cast<float>(sign | 0x7F800000u | (mant << 13));
  if (exp == 0) {
    if (mant == 0) return std::bit_cast<float>(sign);
    // normalize the subnormal
    int e = -1;
    do {
      ++e;
      mant <<= 1;
    } while ((mant & 0x400u) == 0);
    mant &= 0x3FFu;
    exp = static_cast<std::uint32_t>(127 - 15 - e);
    return std::bit_cast<float>(sign | (exp << 23) | (mant << 13));
  }
  return std::bit_cast<float>(sign | ((exp + 127 - 15) << 23) | (mant << 13));
}

inline constexpr float kHalfMax = 65504.0f;

// ---------------------------------------------------------------------------

namespace detail {

inline void put_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint16_t get_be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((std::uint16_t{p[0]} << 8) | p[1]);
}

inline std::uint32_t get_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline float affine_decode(std::uint8_t code, float scale, float zero_point) {
  return static_cast<float>(static_cast<double>(code) * static_cast<double>(scale) +
                            static_cast<double>(zero_point));
}

}  // namespace detail

inline std::uint64_t quantized_payload_bytes(std::uint64_t elements, int bits) {
  return elements * static_cast<std::uint64_t>(bits) / 8;
}

inline QuantizedTensor quantize(const BottleneckTensor& t, int bits) {
  if (!valid_quant_bits(bits)) throw QuantError("bits must be 8, 16 or 32");
  if (t.values.size() != t.element_count())
    throw QuantError("tensor holds " + std::to_string(t.values.size()) + " values, dims need " +
                     std::to_string(t.element_count()));
  for (float v : t.values)
    if (!std::isfinite(v)) throw QuantError("cannot quantize non-finite values");

  QuantizedTensor q;
  q.dims = t.dims;
  q.bits = bits;
  q.codes.reserve(quantized_payload_bytes(t.values.size(), bits));

  switch (bits) {
    case 32:
      for (float v : t.values) detail::put_be32(q.codes, std::bit_cast<std::uint32_t>(v));
      break;
    case 16:
      for (float v : t.values) {
        const std::uint16_t h = float_to_half(v);
        if ((h & 0x7FFFu) == 0x7C00u) throw QuantError("value outside half-precision range");
        detail::put_be16(q.codes, h);
      }
      break;
    case 8: {
      if (t.values.empty()) break;
      const auto [lo, hi] = std::minmax_element(t.values.begin(), t.values.end());
      const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
      q.zero_point = *lo;
      q.scale = range > 0.0 ? static_cast<float>(range / 255.0) : 1.0f;
      if (!(q.scale > 0.0f)) q.scale = std::numeric_limits<float>::denorm_min();
      for (float v : t.values) {
        const double exact = (static_cast<double>(v) - q.zero_point) / q.scale;
        int c = static_cast<int>(std::clamp(std::nearbyint(exact), 0.0, 255.0));
        // pick the neighbouring code whose decoded value lands closest
        int best = c;
        double best_err = std::fabs(detail::affine_decode(static_cast<std::uint8_t>(c), q.scale, q.zero_point) -
                                    static_cast<double>(v));
        for (int n : {c - 1, c + 1}) {
          if (n < 0 || n > 255) continue;
          const double err = std::fabs(
              detail::affine_decode(static_cast<std::uint8_t>(n), q.scale, q.zero_point) - static_cast<double>(v));
          if (err < best_err) best = n, best_err = err;
        }
        q.codes.push_back(static_cast<std::uint8_t>(best));
      }
      break;
    }
  }
  return q;
}

inline BottleneckTensor dequantize(const QuantizedTensor& q) {
  if (!valid_quant_bits(q.bits)) throw QuantError("bits must be 8, 16 or 32");
  const std::uint64_t n = q.element_count();
  if (q.codes.size() != quantized_payload_bytes(n, q.bits))
    throw QuantError("code length " + std::to_string(q.codes.size()) + " does not match " + std::to_string(n) +
                     " elements at " + std::to_string(q.bits) + " bits");
  BottleneckTensor t;
  t.dims = q.dims;
  t.values.resize(n);
  const std::uint8_t* p = q.codes.data();
  switch (q.bits) {
    case 32:
      for (std::uint64_t i = 0; i < n; ++i) t.values[i] = std::bit_cast<float>(detail::get_be32(p + 4 * i));
      break;
    case 16:
      for (std::uint64_t i = 0; i < n; ++i) t.values[i] = half_to_float(detail::get_be16(p + 2 * i));
      break;
    case 8:
      for (std::uint64_t i = 0; i < n; ++i) t.values[i] = detail::affine_decode(p[i], q.scale, q.zero_point);
      break;
  }
  return t;
}

}  // namespace edgesplit
