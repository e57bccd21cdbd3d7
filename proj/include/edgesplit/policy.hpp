#pragma once

// Partition objective, brute-force partition search, the upload-rate
// threshold and the binary offload decision built on it.

#include <cmath>
#include <limits>
#include <vector>

#include "edgesplit/cost_model.hpp"
#include "edgesplit/profiles.hpp"

namespace edgesplit {

inline constexpr double kDefaultDeadlineS = 0.100;
inline constexpr double kInfeasibleRate = std::numeric_limits<double>::infinity();

struct PolicyWeights {
  double w_t = 0.5;
  double w_e = 0.5;

  void validate() const {
    if (!(w_t >= 0.0 && w_t <= 1.0) || !(w_e >= 0.0 && w_e <= 1.0))
      throw ArgumentError("policy weights must lie in [0, 1]");
  }
};

struct PartitionPlan {
  std::size_t k_p = 0;
  double cost = 0.0;
  double latency_s = 0.0;
  double energy_j = 0.0;
  bool feasible = false;
};

enum class Verdict { Local, Offload };

inline const char* to_string(Verdict v) { return v == Verdict::Offload ? "offload" : "local"; }

// Every quantity the threshold policy looks at, for reporting.
struct OffloadTerms {
  std::uint64_t upload_bytes = 0;
  double t_head_s = 0.0;
  double t_tail_cloud_s = 0.0;
  double t_tail_edge_s = 0.0;
  double t_upload_s = 0.0;
  double t_download_s = 0.0;
  double rtt_s = 0.0;
  double e_head_j = 0.0;
  double e_comm_j = 0.0;
  double e_idle_j = 0.0;
  double e_tail_edge_j = 0.0;
};

struct OffloadDecision {
  Verdict verdict = Verdict::Local;
  double r_th_bps = kInfeasibleRate;
  double rate_up_bps = 0.0;
  bool energy_condition = false;
  PartitionPlan predicted;
  OffloadTerms terms;
};

// Weighted latency + energy of splitting at k_p. Communication terms are
// dropped for k_p == K. `quant_bits` only applies when k_p is the bottleneck.
inline PartitionPlan objective_cost(const ModelProfile& model, std::size_t k_p, const DeviceProfile& device,
                                    const ServerProfile& server, const NetworkSample& net,
                                    const RadioModel& radio, const PolicyWeights& weights,
                                    int quant_bits = 32, double deadline_s = kDefaultDeadlineS) {
  const bool offloaded = k_p != model.stage_count();
  const int bits = (k_p == model.bottleneck_index) ? quant_bits : 32;
  const TaskSpec task = derive_task_spec(model, k_p, bits);

  PartitionPlan p;
  p.k_p = k_p;
  if (offloaded) {
    const CommEstimate comm = estimate_comm(task, net, radio);
    const double t_remote = remote_latency_s(model, server, k_p);
    const CompEstimate comp =
        estimate_comp(model, k_p, device, server, t_remote + comm.t_download_s + net.rtt_s);
    p.latency_s = comm.t_comm_s + comp.t_local_s + comp.t_remote_s;
    p.energy_j = comm.e_comm_j + comp.e_local_j + comp.e_idle_j;
  } else {
    const CompEstimate comp = estimate_comp(model, k_p, device, server, 0.0);
    p.latency_s = comp.t_local_s;
    p.energy_j = comp.e_local_j;
  }
  p.cost = weights.w_t * p.latency_s + weights.w_e * p.energy_j;
  p.feasible = p.latency_s <= deadline_s;
  return p;
}

// Minimum-cost deadline-feasible split over k_p = 1..K. When nothing meets
// the deadline the minimum-latency split is returned with feasible = false.
// Ties go to the larger k_p.
inline PartitionPlan optimize_partition(const ModelProfile& model, const DeviceProfile& device,
                                        const ServerProfile& server, const NetworkSample& net,
                                        const RadioModel& radio, const PolicyWeights& weights,
                                        double deadline_s = kDefaultDeadlineS) {
  weights.validate();
  std::optional<PartitionPlan> best_feasible;
  std::optional<PartitionPlan> fastest;
  for (std::size_t k = 1; k <= model.stage_count(); ++k) {
    const PartitionPlan p = objective_cost(model, k, device, server, net, radio, weights, 32, deadline_s);
    if (p.feasible && (!best_feasible || p.cost <= best_feasible->cost)) best_feasible = p;
    if (!fastest || p.latency_s <= fastest->latency_s) fastest = p;
  }
  return best_feasible ? *best_feasible : *fastest;
}

// Minimum upload rate that lets a bottleneck offload finish inside the
// deadline. Returns +inf when the fixed terms alone already use up the window.
inline double threshold_rate_bps(double upload_bits, double t_head_s, double t_tail_cloud_s,
                                 double t_download_s, double rtt_s, double deadline_s = kDefaultDeadlineS) {
  const double slack = deadline_s - (t_head_s + t_tail_cloud_s + t_download_s + rtt_s);
  if (!(slack > 0.0)) return kInfeasibleRate;
  return upload_bits / slack;
}

inline double compute_r_th(const ModelProfile& model, const DeviceProfile& device, const ServerProfile& server,
                           const NetworkSample& net, int quant_bits = 32,
                           double deadline_s = kDefaultDeadlineS) {
  if (!(net.rate_down_bps > 0.0)) throw ArgumentError("rate_down_bps must be > 0");
  if (model.bottleneck_index == model.stage_count()) return kInfeasibleRate;
  const TaskSpec task = derive_task_spec(model, model.bottleneck_index, quant_bits);
  return threshold_rate_bps(static_cast<double>(task.upload_bytes) * 8.0, head_latency_s(model, device),
                            tail_cloud_latency_s(model, server),
                            transfer_time_s(task.download_bytes, net.rate_down_bps), net.rtt_s, deadline_s);
}

// Offload at the bottleneck when the measured upload rate beats r_th, r_th is
// finite and positive, and radio plus idle energy undercuts running the tail
// on the edge. Otherwise run everything locally.
inline OffloadDecision decide_offload(const ModelProfile& model, const DeviceProfile& device,
                                      const ServerProfile& server, const NetworkSample& net,
                                      const RadioModel& radio, int quant_bits = 32,
                                      double deadline_s = kDefaultDeadlineS,
                                      const PolicyWeights& weights = {}) {
  net.validate();
  const std::size_t K = model.stage_count();
  const std::size_t b = model.bottleneck_index;

  OffloadDecision d;
  d.rate_up_bps = net.rate_up_bps;
  OffloadTerms& t = d.terms;
  t.t_head_s = head_latency_s(model, device);
  t.e_head_j = head_energy_j(model, device);
  t.t_tail_edge_s = tail_edge_latency_s(model, device);
  t.e_tail_edge_j = tail_edge_energy_j(model, device);
  t.rtt_s = net.rtt_s;

  const PartitionPlan local = objective_cost(model, K, device, server, net, radio, weights, 32, deadline_s);
  d.predicted = local;
  if (b == K) return d;

  const TaskSpec task = derive_task_spec(model, b, quant_bits);
  const CommEstimate comm = estimate_comm(task, net, radio);
  t.upload_bytes = task.upload_bytes;
  t.t_tail_cloud_s = tail_cloud_latency_s(model, server);
  t.t_upload_s = comm.t_upload_s;
  t.t_download_s = comm.t_download_s;
  t.e_comm_j = comm.e_comm_j;
  t.e_idle_j = device.idle_power_w * (t.t_tail_cloud_s + t.t_download_s + t.rtt_s);

  d.r_th_bps = threshold_rate_bps(static_cast<double>(task.upload_bytes) * 8.0, t.t_head_s, t.t_tail_cloud_s,
                                  t.t_download_s, t.rtt_s, deadline_s);
  d.energy_condition = t.e_comm_j + t.e_idle_j < t.e_tail_edge_j;

  const PartitionPlan offload =
      objective_cost(model, b, device, server, net, radio, weights, quant_bits, deadline_s);
  const bool rate_ok = std::isfinite(d.r_th_bps) && d.r_th_bps > 0.0 && net.rate_up_bps > d.r_th_bps;
  // The feasibility check only matters at the floating-point edge where
  // rate_up barely exceeds r_th.
  if (rate_ok && d.energy_condition && offload.feasible) {
    d.verdict = Verdict::Offload;
    d.predicted = offload;
  }
  return d;
}

struct SplitPoint {
  std::size_t k_p = 0;
  double latency_s = 0.0;
  std::uint64_t payload_bytes = 0;
  double transmission_s = 0.0;
};

// End-to-end latency and payload of every possible split, ordered by k_p.
inline std::vector<SplitPoint> scan_split_points(const ModelProfile& model, const DeviceProfile& device,
                                                 const ServerProfile& server, const NetworkSample& net,
                                                 const RadioModel& radio) {
  std::vector<SplitPoint> out;
  out.reserve(model.stage_count());
  for (std::size_t k = 1; k <= model.stage_count(); ++k) {
    const PartitionPlan p = objective_cost(model, k, device, server, net, radio, PolicyWeights{1.0, 0.0});
    const TaskSpec task = derive_task_spec(model, k);
    out.push_back({k, p.latency_s, task.upload_bytes, transfer_time_s(task.upload_bytes, net.rate_up_bps)});
  }
  return out;
}

}  // namespace edgesplit
