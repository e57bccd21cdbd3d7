#pragma once

// Stand-in for the imitation-learning tail: a tiny fixed-topology network
// whose weights come from a seeded generator, with one weight set per
// navigation command (branch). It exists so edge and cloud produce comparable
// control values without shipping real weights.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "edgesplit/error.hpp"
#include "edgesplit/prng.hpp"
#include "edgesplit/profiles.hpp"
#include "edgesplit/quant.hpp"

namespace edgesplit {

struct ControlOutput {
  float steer = 0.0f;
  float accelerator = 0.0f;
  float brake = 0.0f;

  friend bool operator==(const ControlOutput&, const ControlOutput&) = default;
};

inline constexpr std::uint8_t kBranchCount = 4;

namespace detail {

inline constexpr std::size_t kPoolBins = 8;
inline constexpr std::size_t kFeatures = kPoolBins + 1;  // + speed
inline constexpr std::size_t kHidden = 16;

struct BranchWeights {
  std::array<float, kHidden * kFeatures> w1;
  std::array<float, kHidden> b1;
  std::array<float, 3 * kHidden> w2;
  std::array<float, 3> b2;
};

inline BranchWeights branch_weights(std::uint64_t model_seed, std::uint8_t command) {
  SplitMix64 g(mix_seed(model_seed, 0x7461696CULL + command));
  auto draw = [&g] { return static_cast<float>(g.uniform(-1.0, 1.0)); };
  BranchWeights w;
  for (auto& v : w.w1) v = draw();
  for (auto& v : w.b1) v = draw();
  for (auto& v : w.w2) v = draw();
  for (auto& v : w.b2) v = draw();
  return w;
}

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace detail

// Pools the concatenated tensors into 8 strided-mean bins, appends speed,
// then runs tanh hidden layer -> (tanh steer, sigmoid accelerator, sigmoid brake).
inline ControlOutput stub_tail(std::span<const BottleneckTensor> tensors, float speed_mps, std::uint8_t command,
                               std::uint64_t model_seed) {
  using namespace detail;
  if (command >= kBranchCount) throw ArgumentError("command must be < 4");

  std::array<float, kPoolBins> sums{};
  std::array<std::uint32_t, kPoolBins> counts{};
  std::size_t idx = 0;
  for (const auto& t : tensors)
    for (float v : t.values) {
      sums[idx % kPoolBins] += v;
      ++counts[idx % kPoolBins];
      ++idx;
    }
  std::array<float, kFeatures> x{};
  for (std::size_t i = 0; i < kPoolBins; ++i)
    x[i] = counts[i] ? sums[i] / static_cast<float>(counts[i]) : 0.0f;
  x[kPoolBins] = speed_mps / 10.0f;

  const BranchWeights w = branch_weights(model_seed, command);
  std::array<float, kHidden> h{};
  for (std::size_t j = 0; j < kHidden; ++j) {
    float a = w.b1[j];
    for (std::size_t i = 0; i < kFeatures; ++i) a += w.w1[j * kFeatures + i] * x[i];
    h[j] = std::tanh(a);
  }
  std::array<float, 3> o{};
  for (std::size_t k = 0; k < 3; ++k) {
    float a = w.b2[k];
    for (std::size_t j = 0; j < kHidden; ++j) a += w.w2[k * kHidden + j] * h[j];
    o[k] = a;
  }
  return {std::tanh(o[0]), sigmoid(o[1]), sigmoid(o[2])};
}

// Seeded stand-in for the head output of one timestep: one tensor per
// camera, values uniform in [0, 1).
inline std::vector<BottleneckTensor> synthesize_bottleneck(const ModelProfile& model, std::uint64_t seed,
                                                           std::uint64_t timestep) {
  SplitMix64 g(mix_seed(seed, timestep));
  std::vector<BottleneckTensor> out(model.num_cameras);
  for (std::uint32_t c = 0; c < model.num_cameras; ++c) {
    out[c].dims = model.bottleneck_shape;
    out[c].camera_index = c;
    out[c].values.resize(model.bottleneck_shape.elements());
    for (auto& v : out[c].values) v = static_cast<float>(g.uniform());
  }
  return out;
}

}  // namespace edgesplit
