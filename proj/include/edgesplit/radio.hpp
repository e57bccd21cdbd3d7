#pragma once

#include <string>
#include <string_view>

#include "edgesplit/error.hpp"

namespace edgesplit {

enum class RadioTechnology { ThreeG, Lte, WiFi, Custom };

inline std::string_view to_string(RadioTechnology t) {
  switch (t) {
    case RadioTechnology::ThreeG: return "3g";
    case RadioTechnology::Lte: return "lte";
    case RadioTechnology::WiFi: return "wifi";
    case RadioTechnology::Custom: return "custom";
  }
  return "custom";
}

inline RadioTechnology radio_technology_from_string(std::string_view s) {
  if (s == "3g" || s == "3G") return RadioTechnology::ThreeG;
  if (s == "lte" || s == "LTE" || s == "4g" || s == "4G") return RadioTechnology::Lte;
  if (s == "wifi" || s == "WiFi") return RadioTechnology::WiFi;
  if (s == "custom") return RadioTechnology::Custom;
  throw ArgumentError("unknown radio technology '" + std::string(s) + "'");
}

// Power drawn by the radio as an affine function of throughput:
//   P(rate) = base_w + per_bps_w * rate_bps
struct AffinePower {
  double base_w = 0.0;
  double per_bps_w = 0.0;

  double at(double rate_bps) const noexcept { return base_w + per_bps_w * rate_bps; }

  friend bool operator==(const AffinePower&, const AffinePower&) = default;
};

// Transmit/receive power model of the edge radio.
//
// The per-technology defaults are the throughput-linear fits commonly quoted
// for 3G, LTE and WiFi handsets (mW/Mbps slopes, mW intercept). They are
// placeholders: evaluation depends on them, so real deployments should
// override them in the profile's `radio` section.
struct RadioModel {
  RadioTechnology technology = RadioTechnology::Custom;
  AffinePower tx;
  AffinePower rx;

  double tx_power_w(double rate_up_bps) const noexcept { return tx.at(rate_up_bps); }
  double rx_power_w(double rate_down_bps) const noexcept { return rx.at(rate_down_bps); }

  static RadioModel defaults(RadioTechnology t) {
    // slope in mW per Mbps -> W per bit/s is 1e-9
    constexpr double kMilliWattPerMbps = 1e-9;
    RadioModel m;
    m.technology = t;
    switch (t) {
      case RadioTechnology::ThreeG:
        m.tx = {0.81788, 868.98 * kMilliWattPerMbps};
        m.rx = {0.81788, 122.12 * kMilliWattPerMbps};
        break;
      case RadioTechnology::Lte:
        m.tx = {1.28804, 438.39 * kMilliWattPerMbps};
        m.rx = {1.28804, 51.97 * kMilliWattPerMbps};
        break;
      case RadioTechnology::WiFi:
        m.tx = {0.13286, 283.17 * kMilliWattPerMbps};
        m.rx = {0.13286, 137.01 * kMilliWattPerMbps};
        break;
      case RadioTechnology::Custom:
        break;
    }
    return m;
  }

  // Constant-power model, mostly for tests and hand calculations.
  static RadioModel constant(double tx_w, double rx_w) {
    RadioModel m;
    m.tx = {tx_w, 0.0};
    m.rx = {rx_w, 0.0};
    return m;
  }

  // Both powers must stay non-negative over [0, max_rate_bps].
  void validate(double max_rate_bps = 1e12) const {
    for (const AffinePower* p : {&tx, &rx}) {
      if (p->at(0.0) < 0.0 || p->at(max_rate_bps) < 0.0)
        throw ArgumentError("radio power model evaluates negative on the configured rate domain");
    }
  }

  friend bool operator==(const RadioModel&, const RadioModel&) = default;
};

}  // namespace edgesplit
