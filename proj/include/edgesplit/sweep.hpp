#pragma once

// Upload-rate sweeps of the offload decision and their summaries.

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "edgesplit/policy.hpp"
#include "edgesplit/profiles.hpp"

namespace edgesplit {

struct RateGrid {
  double start_bps = 1e5;
  double stop_bps = 1e8;
  std::size_t points = 100;
  bool log_spaced = true;

  void validate() const {
    if (!(start_bps > 0.0) || !(stop_bps > start_bps)) throw ArgumentError("rate grid needs 0 < start < stop");
    if (points < 2) throw ArgumentError("rate grid needs at least 2 points");
  }

  std::vector<double> rates() const {
    validate();
    std::vector<double> r(points);
    for (std::size_t i = 0; i < points; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(points - 1);
      r[i] = log_spaced ? start_bps * std::pow(stop_bps / start_bps, f) : start_bps + (stop_bps - start_bps) * f;
    }
    r.front() = start_bps;
    r.back() = stop_bps;
    return r;
  }
};

struct SweepConfig {
  RateGrid grid;
  std::vector<int> quant_bits{32};
  double rtt_s = 0.005;
  // Downlink rate, held fixed so r_th is constant along the sweep; nullopt
  // makes it follow the uplink rate.
  std::optional<double> rate_down_bps = 10e6;
  double deadline_s = kDefaultDeadlineS;
};

struct SweepRow {
  double rate_bps = 0.0;
  int quant_bits = 32;
  Verdict path = Verdict::Local;
  double latency_s = 0.0;
  double energy_j = 0.0;
  double r_th_bps = kInfeasibleRate;
  bool energy_condition = false;
  bool deadline_met = false;
};

inline std::vector<SweepRow> sweep_rates(const ProfileBundle& p, const SweepConfig& cfg) {
  const auto rates = cfg.grid.rates();
  std::vector<SweepRow> rows;
  rows.reserve(rates.size() * cfg.quant_bits.size());
  for (int bits : cfg.quant_bits) {
    for (double rate : rates) {
      const NetworkSample net{rate, cfg.rate_down_bps.value_or(rate), cfg.rtt_s};
      const OffloadDecision d = decide_offload(p.model, p.device, p.server, net, p.radio, bits, cfg.deadline_s);
      SweepRow row;
      row.rate_bps = rate;
      row.quant_bits = bits;
      row.path = d.verdict;
      row.r_th_bps = d.r_th_bps;
      row.energy_condition = d.energy_condition;
      row.latency_s = d.predicted.latency_s;
      row.energy_j = d.predicted.energy_j;
      row.deadline_met = d.predicted.latency_s <= cfg.deadline_s;
      rows.push_back(row);
    }
  }
  return rows;
}

struct SweepSummary {
  double edge_only_energy_j = 0.0;
  double r_th_bps = kInfeasibleRate;
  std::optional<double> first_offload_rate_bps;
  double energy_at_first_offload_j = 0.0;
  double savings_pct = 0.0;
  std::size_t deadline_misses = 0;
  std::size_t rows = 0;
};

// Summary of one (model, quantization) sweep. Savings are measured at the
// first grid rate where the policy offloads.
inline SweepSummary summarize(const std::vector<SweepRow>& rows, double edge_only_energy_j) {
  if (rows.empty()) throw ArgumentError("cannot summarize an empty sweep");
  SweepSummary s;
  s.rows = rows.size();
  s.edge_only_energy_j = edge_only_energy_j;
  s.r_th_bps = rows.front().r_th_bps;
  for (const auto& r : rows) {
    if (!r.deadline_met) ++s.deadline_misses;
    if (!s.first_offload_rate_bps && r.path == Verdict::Offload) {
      // r_th moves slightly with the downlink rate; report it where the switch happens
      s.r_th_bps = r.r_th_bps;
      s.first_offload_rate_bps = r.rate_bps;
      s.energy_at_first_offload_j = r.energy_j;
    }
  }
  if (s.first_offload_rate_bps && edge_only_energy_j > 0.0)
    s.savings_pct = (edge_only_energy_j - s.energy_at_first_offload_j) / edge_only_energy_j * 100.0;
  return s;
}

inline SweepSummary summarize(const std::vector<SweepRow>& rows, const ProfileBundle& p) {
  return summarize(rows, edge_energy_j(p.model, p.device, 1, p.model.stage_count()));
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "rate_bps,quant_bits,path,latency_s,energy_j,r_th_bps,energy_condition,deadline_met\n";
  std::ostringstream row;
  row << std::setprecision(10);
  for (const auto& r : rows) {
    row.str({});
    row << r.rate_bps << ',' << r.quant_bits << ',' << to_string(r.path) << ',' << r.latency_s << ','
        << r.energy_j << ',' << r.r_th_bps << ',' << (r.energy_condition ? 1 : 0) << ','
        << (r.deadline_met ? 1 : 0) << '\n';
    out << row.str();
  }
}

inline void write_sweep_summary(std::ostream& out, const SweepSummary& s) {
  out << std::setprecision(10);
  out << "edge_only_energy_j=" << s.edge_only_energy_j << '\n';
  if (std::isfinite(s.r_th_bps)) out << "r_th_bps=" << s.r_th_bps << '\n';
  else out << "r_th_bps=inf\n";
  if (s.first_offload_rate_bps) {
    out << "first_offload_rate_bps=" << *s.first_offload_rate_bps << '\n'
        << "energy_at_first_offload_j=" << s.energy_at_first_offload_j << '\n'
        << "savings_pct=" << s.savings_pct << '\n';
  } else {
    out << "no feasible r_th on this grid\n";
  }
  out << "deadline_misses=" << s.deadline_misses << '\n';
}

}  // namespace edgesplit
