#pragma once

// Communication and computation cost models.
//
// Communication: upload/download times are payload bits over the effective
// rate, the round trip is added once, and radio energy is transmit power
// times upload time plus receive power times download time.
//
// Computation: each stage runs either on the edge (1..k_p) or the server
// (k_p+1..K). Stage cost comes from measurements when the profile has them,
// otherwise from cycle counts and clock frequency. While the server works the
// edge sits idle and burns idle power.

#include <cmath>
#include <cstddef>
#include <string>

#include "edgesplit/error.hpp"
#include "edgesplit/profiles.hpp"
#include "edgesplit/radio.hpp"

namespace edgesplit {

struct NetworkSample {
  double rate_up_bps = 0.0;
  double rate_down_bps = 0.0;
  double rtt_s = 0.0;

  void validate() const {
    if (!(rate_up_bps > 0.0)) throw ArgumentError("rate_up_bps must be > 0");
    if (!(rate_down_bps > 0.0)) throw ArgumentError("rate_down_bps must be > 0");
    if (!(rtt_s >= 0.0) || !std::isfinite(rtt_s)) throw ArgumentError("rtt_s must be finite and >= 0");
  }

  friend bool operator==(const NetworkSample&, const NetworkSample&) = default;
};

struct CommEstimate {
  double t_upload_s = 0.0;
  double t_download_s = 0.0;
  double t_comm_s = 0.0;
  double e_comm_j = 0.0;
};

struct CompEstimate {
  double t_local_s = 0.0;
  double t_remote_s = 0.0;
  double e_local_j = 0.0;
  double e_idle_j = 0.0;
};

inline double transfer_time_s(std::uint64_t bytes, double rate_bps) {
  return static_cast<double>(bytes) * 8.0 / rate_bps;
}

inline CommEstimate estimate_comm(const TaskSpec& task, const NetworkSample& net, const RadioModel& radio) {
  net.validate();
  CommEstimate c;
  c.t_upload_s = transfer_time_s(task.upload_bytes, net.rate_up_bps);
  c.t_download_s = transfer_time_s(task.download_bytes, net.rate_down_bps);
  c.t_comm_s = c.t_upload_s + c.t_download_s + net.rtt_s;
  c.e_comm_j = radio.tx_power_w(net.rate_up_bps) * c.t_upload_s +
               radio.rx_power_w(net.rate_down_bps) * c.t_download_s;
  return c;
}

// ---------------------------------------------------------------------------
// per-stage costs

inline double stage_edge_latency_s(const SubTaskCost& s, const DeviceProfile& device) {
  if (s.measured_edge_latency_s) return *s.measured_edge_latency_s;
  if (!s.cycles) throw ArgumentError("stage '" + s.name + "' has neither cycles nor a measured edge latency");
  if (!(device.frequency_hz > 0.0))
    throw ArgumentError("cycle-based edge latency needs device frequency_hz > 0");
  return *s.cycles / device.frequency_hz;
}

inline double stage_edge_energy_j(const SubTaskCost& s, const DeviceProfile& device) {
  if (s.measured_edge_energy_j) return *s.measured_edge_energy_j;
  if (s.cycles && device.energy_per_cycle_j) return *device.energy_per_cycle_j * *s.cycles;
  if (device.active_power_w) return *device.active_power_w * stage_edge_latency_s(s, device);
  throw ArgumentError("stage '" + s.name + "' has no edge energy: needs measured energy, "
                      "cycles with energy_per_cycle_j, or device active_power_w");
}

// Server-side latency of one stage, or nullopt when neither a measurement nor
// cycles with a known server clock are available.
inline std::optional<double> stage_cloud_latency_s(const SubTaskCost& s, const ServerProfile& server) {
  if (s.measured_cloud_latency_s) return *s.measured_cloud_latency_s;
  if (s.cycles && server.frequency_hz > 0.0) return *s.cycles / server.frequency_hz;
  if (s.cycles) throw ArgumentError("cycle-based cloud latency needs server frequency_hz > 0");
  return std::nullopt;
}

// Edge latency of stages [first, last] (1-based, inclusive). Empty range is 0.
inline double edge_latency_s(const ModelProfile& m, const DeviceProfile& d, std::size_t first, std::size_t last) {
  double t = 0.0;
  for (std::size_t k = first; k <= last; ++k) t += stage_edge_latency_s(m.stage(k), d);
  return t;
}

inline double edge_energy_j(const ModelProfile& m, const DeviceProfile& d, std::size_t first, std::size_t last) {
  double e = 0.0;
  for (std::size_t k = first; k <= last; ++k) e += stage_edge_energy_j(m.stage(k), d);
  return e;
}

// Server latency of everything after a split at k_p.
inline double remote_latency_s(const ModelProfile& m, const ServerProfile& server, std::size_t k_p) {
  double t = 0.0;
  for (std::size_t k = k_p + 1; k <= m.stage_count(); ++k) {
    auto l = stage_cloud_latency_s(m.stage(k), server);
    if (!l) {
      if (k_p == m.bottleneck_index && server.fixed_tail_latency_s) return *server.fixed_tail_latency_s;
      throw ArgumentError("stage '" + m.stage(k).name + "' has no cloud latency and no cycles");
    }
    t += *l;
  }
  return t;
}

inline CompEstimate estimate_comp(const ModelProfile& model, std::size_t k_p, const DeviceProfile& device,
                                  const ServerProfile& server, double wait_s) {
  const std::size_t K = model.stage_count();
  if (k_p < 1 || k_p > K)
    throw ArgumentError("partition index " + std::to_string(k_p) + " outside [1, " + std::to_string(K) + "]");
  if (!(wait_s >= 0.0)) throw ArgumentError("wait_s must be >= 0");

  CompEstimate c;
  c.t_local_s = edge_latency_s(model, device, 1, k_p);
  c.e_local_j = edge_energy_j(model, device, 1, k_p);
  if (k_p < K) {
    c.t_remote_s = remote_latency_s(model, server, k_p);
    c.e_idle_j = device.idle_power_w * wait_s;
  }
  return c;
}

// Head = stages up to and including the bottleneck; tail = the rest.
inline double head_latency_s(const ModelProfile& m, const DeviceProfile& d) {
  return edge_latency_s(m, d, 1, m.bottleneck_index);
}
inline double head_energy_j(const ModelProfile& m, const DeviceProfile& d) {
  return edge_energy_j(m, d, 1, m.bottleneck_index);
}
inline double tail_edge_latency_s(const ModelProfile& m, const DeviceProfile& d) {
  return edge_latency_s(m, d, m.bottleneck_index + 1, m.stage_count());
}
inline double tail_edge_energy_j(const ModelProfile& m, const DeviceProfile& d) {
  return edge_energy_j(m, d, m.bottleneck_index + 1, m.stage_count());
}
inline double tail_cloud_latency_s(const ModelProfile& m, const ServerProfile& s) {
  return remote_latency_s(m, s, m.bottleneck_index);
}

}  // namespace edgesplit
