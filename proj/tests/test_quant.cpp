#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <vector>

#include "edgesplit/prng.hpp"
#include "edgesplit/quant.hpp"

using namespace edgesplit;

namespace {

BottleneckTensor tensor(std::vector<float> v) {
  BottleneckTensor t;
  t.dims = {1, 1, static_cast<std::uint16_t>(v.size())};
  t.values = std::move(v);
  return t;
}

// Every finite binary16 value, decoded independently of the library with
// ldexp, sorted ascending with its bit pattern.
struct HalfTable {
  std::vector<std::pair<double, std::uint16_t>> finite;

  HalfTable() {
    for (std::uint32_t h = 0; h < 0x10000; ++h) {
      const std::uint32_t e = (h >> 10) & 0x1F, m = h & 0x3FF;
      if (e == 0x1F) continue;
      double v = e == 0 ? std::ldexp(static_cast<double>(m), -24)
                        : std::ldexp(1.0 + static_cast<double>(m) / 1024.0, static_cast<int>(e) - 15);
      if (h & 0x8000) v = -v;
      finite.emplace_back(v, static_cast<std::uint16_t>(h));
    }
    std::sort(finite.begin(), finite.end());
  }

  static double decode(std::uint16_t h) {
    const std::uint32_t e = (h >> 10) & 0x1F, m = h & 0x3FF;
    const double v = e == 0 ? std::ldexp(static_cast<double>(m), -24)
                            : std::ldexp(1.0 + static_cast<double>(m) / 1024.0, static_cast<int>(e) - 15);
    return (h & 0x8000) ? -v : v;
  }

  // Nearest half by brute search; ties to the even significand. The largest
  // finite magnitude rounds to infinity past 65520, as in IEEE overflow.
  std::uint16_t nearest(float f) const {
    const double x = f;
    if (std::fabs(x) >= 65520.0) return std::signbit(x) ? 0xFC00 : 0x7C00;
    const auto at = static_cast<std::size_t>(
        std::lower_bound(finite.begin(), finite.end(), std::make_pair(x, std::uint16_t{0})) - finite.begin());
    std::vector<std::pair<double, std::uint16_t>> cand;
    for (std::size_t j = at == 0 ? 0 : at - 1; j < finite.size() && j <= at + 1; ++j) cand.push_back(finite[j]);
    std::uint16_t best = cand[0].second;
    double best_d = std::fabs(cand[0].first - x);
    for (const auto& [v, h] : cand) {
      const double d = std::fabs(v - x);
      if (d < best_d || (d == best_d && (h & 1) == 0 && (best & 1) == 1)) {
        best = h;
        best_d = d;
      }
    }
    // zero keeps the sign of the input
    if ((best & 0x7FFF) == 0) return std::signbit(x) ? 0x8000 : 0x0000;
    return best;
  }
};

const HalfTable& halves() {
  static const HalfTable t;
  return t;
}

}  // namespace

TEST(Half, DecodesEveryPatternExactly) {
  for (std::uint32_t h = 0; h < 0x10000; ++h) {
    const auto hb = static_cast<std::uint16_t>(h);
    const float f = half_to_float(hb);
    const std::uint32_t e = (h >> 10) & 0x1F;
    if (e == 0x1F) {
      if (h & 0x3FF) {
        EXPECT_TRUE(std::isnan(f));
      } else {
        EXPECT_TRUE(std::isinf(f));
      }
      continue;
    }
    ASSERT_EQ(static_cast<double>(f), HalfTable::decode(hb)) << std::hex << h;
    ASSERT_EQ(std::signbit(f), (h & 0x8000) != 0);
  }
}

TEST(Half, EncodeRoundTripsEveryFiniteHalf) {
  for (const auto& [v, h] : halves().finite) ASSERT_EQ(float_to_half(static_cast<float>(v)), h) << v;
}

TEST(Half, EncodeMatchesBruteForceNearest) {
  const auto& tab = halves();
  SplitMix64 g(11);
  std::vector<float> probes = {0.0f, -0.0f, 1e-10f, 5.9604645e-8f, 2.9802322e-8f, 2.9802326e-8f, 6.1035156e-5f,
                               6.1032e-5f, 65504.0f, 65519.99f, 65520.0f, -65520.0f, 1.0f + 1.0f / 2048.0f,
                               1.0f + 3.0f / 2048.0f, std::numeric_limits<float>::denorm_min(), 1e30f};
  // midpoints between neighbouring halves exercise ties-to-even
  for (std::size_t i = 0; i + 1 < tab.finite.size(); i += 97) {
    const double mid = (tab.finite[i].first + tab.finite[i + 1].first) / 2;
    probes.push_back(static_cast<float>(mid));
  }
  for (int i = 0; i < 200000; ++i) {
    // random bit patterns across the whole float range, and dense values near half range
    probes.push_back(std::bit_cast<float>(static_cast<std::uint32_t>(g.next())));
    probes.push_back(static_cast<float>(g.uniform(-70000.0, 70000.0)));
    probes.push_back(static_cast<float>(g.uniform(-1e-4, 1e-4)));
  }
  for (float f : probes) {
    if (std::isnan(f)) continue;
    if (std::isinf(f)) {
      EXPECT_EQ(float_to_half(f), f > 0 ? 0x7C00 : 0xFC00);
      continue;
    }
    ASSERT_EQ(float_to_half(f), tab.nearest(f)) << f;
  }
}

TEST(Half, NanStaysNan) {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  EXPECT_TRUE(std::isnan(half_to_float(float_to_half(nan))));
}

TEST(Quantize, ConstantTensorIsExact) {
  const auto q = quantize(tensor(std::vector<float>(10, 0.5f)), 8);
  EXPECT_EQ(q.scale, 1.0f);
  EXPECT_EQ(q.zero_point, 0.5f);
  for (auto c : q.codes) EXPECT_EQ(c, 0);
  for (float v : dequantize(q).values) EXPECT_EQ(v, 0.5f);
}

TEST(Quantize, ZeroOneUsesFullCodeRange) {
  const auto q = quantize(tensor({0.0f, 1.0f}), 8);
  EXPECT_EQ(q.codes, (std::vector<std::uint8_t>{0, 255}));
  EXPECT_EQ(q.scale, static_cast<float>(1.0 / 255.0));
  EXPECT_EQ(q.zero_point, 0.0f);
  const auto d = dequantize(q);
  EXPECT_EQ(d.values[0], 0.0f);
  EXPECT_EQ(d.values[1], 1.0f);
}

TEST(Quantize, ThirtyTwoBitIsIdentity) {
  SplitMix64 g(2);
  std::vector<float> v(1000);
  for (auto& x : v) x = std::bit_cast<float>(static_cast<std::uint32_t>(g.next()) & 0xBF7FFFFFu);  // finite
  const auto t = tensor(v);
  const auto q = quantize(t, 32);
  EXPECT_EQ(q.scale, 1.0f);
  EXPECT_EQ(q.zero_point, 0.0f);
  const auto back = dequantize(q);
  for (std::size_t i = 0; i < v.size(); ++i)
    ASSERT_EQ(std::bit_cast<std::uint32_t>(back.values[i]), std::bit_cast<std::uint32_t>(v[i]));
}

TEST(Quantize, PayloadSizes) {
  SplitMix64 g(4);
  for (int n : {1, 7, 825, 2904}) {
    std::vector<float> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = static_cast<float>(g.uniform(-3, 3));
    const auto t = tensor(v);
    const auto q32 = quantize(t, 32), q16 = quantize(t, 16), q8 = quantize(t, 8);
    EXPECT_EQ(q32.codes.size(), 4u * n);
    EXPECT_EQ(q16.codes.size(), 2u * n);
    EXPECT_EQ(q8.codes.size(), 1u * n);
    EXPECT_EQ(q16.codes.size() * 2, q32.codes.size());
    EXPECT_EQ(q8.codes.size() * 4, q32.codes.size());
  }
}

TEST(Quantize, CodesAreBigEndian) {
  const auto q = quantize(tensor({1.0f}), 32);
  EXPECT_EQ(q.codes, (std::vector<std::uint8_t>{0x3F, 0x80, 0x00, 0x00}));
  const auto h = quantize(tensor({1.0f}), 16);
  EXPECT_EQ(h.codes, (std::vector<std::uint8_t>{0x3C, 0x00}));
}

TEST(Quantize, EightBitErrorBoundExhaustive) {
  // every 3-element tensor over a grid mixing signs, magnitudes and
  // near-duplicate values
  const std::array<float, 14> grid = {-1000.0f, -3.5f, -1.0f, -0.1f, -1e-6f, 0.0f, 1e-7f,
                                      0.3f,     1.0f,  1.0000001f, 2.75f, 17.0f, 255.0f, 4096.5f};
  std::size_t checked = 0;
  for (float a : grid)
    for (float b : grid)
      for (float c : grid) {
        const auto t = tensor({a, b, c});
        const auto back = dequantize(quantize(t, 8));
        const double range = static_cast<double>(std::max({a, b, c})) - std::min({a, b, c});
        for (std::size_t i = 0; i < 3; ++i) {
          const double err = std::fabs(static_cast<double>(back.values[i]) - t.values[i]);
          ASSERT_LE(err, range / 510.0) << a << ' ' << b << ' ' << c;
          ++checked;
        }
      }
  EXPECT_EQ(checked, 14u * 14u * 14u * 3u);
}

TEST(Quantize, EightBitErrorBoundRandom) {
  SplitMix64 g(8);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = 1 + g.next() % 64;
    const double lo = g.uniform(-1e4, 1e4);
    const double span = std::pow(10.0, g.uniform(-6, 4));
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(lo + span * g.uniform());
    const auto back = dequantize(quantize(tensor(v), 8));
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double range = static_cast<double>(*mx) - *mn;
    for (std::size_t k = 0; k < n; ++k) {
      // Decoded values are float32, so a value sitting between two codes can
      // land up to half an ulp further away than the real-valued bound.
      const float mag = std::max(std::fabs(*mn), std::fabs(*mx));
      const double half_ulp = (std::nextafter(mag, INFINITY) - mag) / 2.0;
      ASSERT_LE(std::fabs(static_cast<double>(back.values[k]) - v[k]), range / 510.0 + half_ulp);
    }
  }
}

TEST(Quantize, SixteenBitRelativeErrorInNormalRange) {
  SplitMix64 g(16);
  const double lo = std::ldexp(1.0, -14);
  for (int i = 0; i < 100000; ++i) {
    const double mag = std::exp(g.uniform(std::log(lo), std::log(65504.0)));
    const float v = static_cast<float>(g.uniform() < 0.5 ? -mag : mag);
    const auto back = dequantize(quantize(tensor({v}), 16));
    ASSERT_LE(std::fabs(static_cast<double>(back.values[0]) - v) / std::fabs(static_cast<double>(v)),
              std::ldexp(1.0, -11));
  }
}

TEST(Quantize, Errors) {
  EXPECT_THROW(quantize(tensor({1.0f, std::numeric_limits<float>::infinity()}), 8), QuantError);
  EXPECT_THROW(quantize(tensor({std::numeric_limits<float>::quiet_NaN()}), 32), QuantError);
  EXPECT_THROW(quantize(tensor({1.0f}), 12), QuantError);
  EXPECT_THROW(quantize(tensor({70000.0f}), 16), QuantError);
  EXPECT_NO_THROW(quantize(tensor({65504.0f}), 16));

  BottleneckTensor wrong = tensor({1.0f, 2.0f});
  wrong.dims = {1, 1, 3};
  EXPECT_THROW(quantize(wrong, 8), QuantError);

  auto q = quantize(tensor({1.0f, 2.0f}), 16);
  q.codes.pop_back();
  EXPECT_THROW(dequantize(q), QuantError);
  q.bits = 4;
  EXPECT_THROW(dequantize(q), QuantError);
}
