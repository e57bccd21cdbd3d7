#pragma once

// Per-timestep offload runtime.
//
// Each control period: measure the network, evaluate the threshold policy,
// run the head, then either ship the bottleneck and idle until the response
// or the fail-safe timer, or run the tail locally. The fail-safe instant is
// deadline - (edge tail latency + epsilon), measured from the start of the
// period, so the local tail can still finish in time when the server is late.
//
// Time is simulated by default: phase durations come from the profiles and
// the network trace, not from the wall clock.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgesplit/control.hpp"
#include "edgesplit/cost_model.hpp"
#include "edgesplit/netsim.hpp"
#include "edgesplit/policy.hpp"
#include "edgesplit/profiles.hpp"
#include "edgesplit/quant.hpp"
#include "edgesplit/wire.hpp"

namespace edgesplit {

struct RuntimeConfig {
  double deadline_s = kDefaultDeadlineS;
  double epsilon_s = 0.002;
  int quant_bits = 32;
  // Exponential smoothing weight of the newest rate sample; nullopt uses the
  // latest sample as-is.
  std::optional<double> smoothing;
  std::uint64_t seed = 42;
  float speed_mps = 8.0f;
  // Fixed navigation command; nullopt cycles through the branches by step.
  std::optional<std::uint8_t> command;

  void validate() const {
    if (!(deadline_s > 0.0)) throw ArgumentError("deadline_s must be > 0");
    if (!(epsilon_s > 0.0 && epsilon_s < deadline_s)) throw ArgumentError("epsilon_s must lie in (0, deadline_s)");
    if (!valid_quant_bits(quant_bits)) throw ArgumentError("quant_bits must be 8, 16 or 32");
    if (smoothing && !(*smoothing > 0.0 && *smoothing <= 1.0))
      throw ArgumentError("smoothing must lie in (0, 1]");
    if (command && *command >= kBranchCount) throw ArgumentError("command must be < 4");
  }
};

enum class StepPath { LocalFull, OffloadSuccess, OffloadTimeoutRollback };

inline const char* to_string(StepPath p) {
  switch (p) {
    case StepPath::LocalFull: return "local_full";
    case StepPath::OffloadSuccess: return "offload_success";
    case StepPath::OffloadTimeoutRollback: return "offload_timeout_rollback";
  }
  return "?";
}

struct PhaseTimes {
  double head = 0.0, tx = 0.0, idle = 0.0, rx = 0.0, tail = 0.0;
  double total() const { return head + tx + idle + rx + tail; }
};

struct PhaseEnergy {
  double head = 0.0, comm = 0.0, idle = 0.0, tail = 0.0;
  double total() const { return head + comm + idle + tail; }
};

struct TimestepReport {
  std::uint64_t step = 0;
  double start_s = 0.0;
  StepPath path = StepPath::LocalFull;
  Verdict verdict = Verdict::Local;
  double r_th_bps = kInfeasibleRate;
  NetworkSample network;  // what the policy saw
  PhaseTimes latency;
  double latency_s = 0.0;
  PhaseEnergy energy;
  double energy_j = 0.0;
  double failsafe_at_s = 0.0;  // offset of the fail-safe instant, offload steps only
  bool deadline_met = false;
  bool late_response_discarded = false;
  ControlOutput control;
};

// ---------------------------------------------------------------------------
// offload channels

struct OffloadAttempt {
  std::uint64_t step = 0;
  double step_start_s = 0.0;   // absolute time of the period start
  double tx_start_s = 0.0;     // offset when transmission begins
  double failsafe_at_s = 0.0;  // offset at which the edge gives up waiting
  const wire::RequestFrame* request = nullptr;
  std::uint64_t upload_bytes = 0;
  std::uint64_t download_bytes = 0;
};

struct OffloadOutcome {
  bool responded = false;
  ControlOutput control;
  double upload_s = 0.0;    // time spent transmitting
  double download_s = 0.0;  // time spent receiving the result
  double finish_s = 0.0;    // offset of response receipt, or of giving up
  bool late_response = false;
};

// Carries a bottleneck to a server and waits at most until the fail-safe
// instant. Implementations: SimulatedChannel (trace-driven) and SocketChannel
// (transport.hpp).
class OffloadChannel {
 public:
  virtual ~OffloadChannel() = default;
  virtual OffloadOutcome offload(const OffloadAttempt& attempt) = 0;
};

enum class FaultMode { None, Drop, Delay };

inline FaultMode fault_mode_from_string(std::string_view s) {
  if (s == "none") return FaultMode::None;
  if (s == "drop") return FaultMode::Drop;
  if (s == "delay") return FaultMode::Delay;
  throw ArgumentError("unknown fault mode '" + std::string(s) + "'");
}

struct ServerModel {
  double tail_latency_s = 0.0;
  std::uint64_t tail_seed = 0;
};

struct ServerFaults {
  FaultMode mode = FaultMode::None;
  double delay_s = 0.0;
};

// Cloud side evaluation shared by the simulated and the socket server.
inline ControlOutput evaluate_request(const wire::RequestFrame& req, std::uint64_t tail_seed) {
  std::vector<BottleneckTensor> tensors;
  tensors.reserve(req.tensors.size());
  for (const auto& q : req.tensors) tensors.push_back(dequantize(q));
  return stub_tail(tensors, req.speed, req.command, tail_seed);
}

// Trace-driven link and server. Upload and download integrate the trace rate
// from the moment they start, so a rate collapse inside the period stretches
// the transfer. A sample flagged undelivered loses the request.
class SimulatedChannel final : public OffloadChannel {
 public:
  SimulatedChannel(const NetworkTrace& trace, std::unordered_map<std::uint16_t, ServerModel> models,
                   ServerFaults faults = {})
      : trace_(trace), models_(std::move(models)), faults_(faults) {}

  OffloadOutcome offload(const OffloadAttempt& a) override {
    OffloadOutcome o;
    const double t0 = a.step_start_s + a.tx_start_s;
    const TraceSample& at_tx = trace_.at(t0);
    const double upload = transfer_duration_s(trace_, t0, static_cast<double>(a.upload_bytes) * 8.0, true);
    const double budget = std::max(0.0, a.failsafe_at_s - a.tx_start_s);

    auto it = models_.find(a.request->model_id);
    const bool answered = at_tx.delivered && faults_.mode != FaultMode::Drop && it != models_.end();
    if (answered) {
      const double extra = faults_.mode == FaultMode::Delay ? faults_.delay_s : 0.0;
      const double reply_at = a.tx_start_s + upload + at_tx.rtt_s + it->second.tail_latency_s + extra;
      const double download = transfer_duration_s(trace_, a.step_start_s + reply_at,
                                                  static_cast<double>(a.download_bytes) * 8.0, false);
      if (reply_at + download <= a.failsafe_at_s) {
        o.responded = true;
        o.control = evaluate_request(*a.request, it->second.tail_seed);
        o.upload_s = upload;
        o.download_s = download;
        o.finish_s = reply_at + download;
        return o;
      }
      o.late_response = true;
    }
    o.upload_s = std::min(upload, budget);
    o.finish_s = a.tx_start_s + budget;
    return o;
  }

 private:
  const NetworkTrace& trace_;
  std::unordered_map<std::uint16_t, ServerModel> models_;
  ServerFaults faults_;
};

inline ServerModel server_model_for(const ModelProfile& model, const ServerProfile& server) {
  return {tail_cloud_latency_s(model, server), model.tail_seed};
}

// ---------------------------------------------------------------------------

struct EpisodeSummary {
  std::size_t steps = 0;
  std::size_t local_steps = 0;
  std::size_t offload_steps = 0;
  std::size_t rollback_steps = 0;
  std::size_t deadline_misses = 0;
  double total_energy_j = 0.0;
  double baseline_energy_j = 0.0;  // all-edge energy over the same steps
  double savings_pct = 0.0;
  double mean_latency_s = 0.0;
  double max_latency_s = 0.0;
};

struct EpisodeResult {
  std::vector<TimestepReport> reports;
  EpisodeSummary summary;
};

class EdgeRuntime {
 public:
  EdgeRuntime(const ModelProfile& model, const DeviceProfile& device, const ServerProfile& server,
              const RadioModel& radio, RuntimeConfig cfg)
      : model_(model), device_(device), server_(server), radio_(radio), cfg_(cfg) {
    cfg_.validate();
    t_head_ = head_latency_s(model_, device_);
    e_head_ = head_energy_j(model_, device_);
    t_tail_edge_ = tail_edge_latency_s(model_, device_);
    e_tail_edge_ = tail_edge_energy_j(model_, device_);
  }

  const RuntimeConfig& config() const noexcept { return cfg_; }

  // Offset from the period start at which a pending offload is abandoned.
  // When even an immediate local tail cannot make the deadline, waiting for
  // the server until the deadline is the better bet.
  double failsafe_instant_s() const {
    const double at = cfg_.deadline_s - (t_tail_edge_ + cfg_.epsilon_s);
    return at >= t_head_ ? at : cfg_.deadline_s;
  }

  // Energy of running the whole model on the edge for one period.
  double all_edge_energy_j() const { return e_head_ + e_tail_edge_; }

  TimestepReport run_timestep(std::uint64_t step, double start_s, const NetworkTrace& trace,
                              OffloadChannel& channel) {
    TimestepReport r;
    r.step = step;
    r.start_s = start_s;

    // measure the network
    const NetworkSample measured = sample_at(trace, start_s);
    r.network = smooth(measured);

    // r_th, T^D, E^comm for the current conditions
    const OffloadDecision d =
        decide_offload(model_, device_, server_, r.network, radio_, cfg_.quant_bits, cfg_.deadline_s);
    r.verdict = d.verdict;
    r.r_th_bps = d.r_th_bps;

    // head
    const auto head_out = synthesize_bottleneck(model_, cfg_.seed, step);
    const std::uint8_t command = cfg_.command.value_or(static_cast<std::uint8_t>(step % kBranchCount));
    r.latency.head = t_head_;
    r.energy.head = e_head_;

    const auto run_local_tail = [&] {
      r.latency.tail = t_tail_edge_;
      r.energy.tail = e_tail_edge_;
      r.control = stub_tail(head_out, cfg_.speed_mps, command, model_.tail_seed);
    };

    if (d.verdict == Verdict::Offload) {
      wire::RequestFrame req;
      req.timestep = step;
      req.model_id = model_.model_id;
      req.command = command;
      req.speed = cfg_.speed_mps;
      req.quant_bits = static_cast<std::uint8_t>(cfg_.quant_bits);
      for (const auto& t : head_out) req.tensors.push_back(quantize(t, cfg_.quant_bits));

      OffloadAttempt a;
      a.step = step;
      a.step_start_s = start_s;
      a.tx_start_s = t_head_;
      a.failsafe_at_s = failsafe_instant_s();
      a.request = &req;
      a.upload_bytes = wire::offload_payload_bytes(req);
      a.download_bytes = model_.result_bytes;
      r.failsafe_at_s = a.failsafe_at_s;

      const OffloadOutcome o = channel.offload(a);
      r.late_response_discarded = o.late_response;
      const double p_tx = radio_.tx_power_w(r.network.rate_up_bps);
      const double p_rx = radio_.rx_power_w(r.network.rate_down_bps);
      r.latency.tx = o.upload_s;
      r.latency.rx = o.responded ? o.download_s : 0.0;
      r.latency.idle = std::max(0.0, o.finish_s - t_head_ - r.latency.tx - r.latency.rx);
      r.energy.comm = p_tx * r.latency.tx + p_rx * r.latency.rx;
      r.energy.idle = device_.idle_power_w * r.latency.idle;
      if (o.responded) {
        r.path = StepPath::OffloadSuccess;
        r.control = o.control;
      } else {
        // fail-safe: wake up and finish locally
        r.path = StepPath::OffloadTimeoutRollback;
        run_local_tail();
      }
    } else {
      r.path = StepPath::LocalFull;
      run_local_tail();
    }

    r.latency_s = r.latency.total();
    r.energy_j = r.energy.total();
    r.deadline_met = r.latency_s <= cfg_.deadline_s;
    return r;
  }

  // One report per control period, starting at the first trace sample.
  // `steps` defaults to the number of whole periods the trace covers.
  EpisodeResult run_episode(const NetworkTrace& trace, OffloadChannel& channel,
                            std::optional<std::size_t> steps = std::nullopt) {
    if (trace.empty()) throw ArgumentError("episode needs a non-empty trace");
    const std::size_t n =
        steps.value_or(static_cast<std::size_t>(std::floor((trace.end_s() - trace.start_s()) / cfg_.deadline_s +
                                                           1e-9)) + 1);
    EpisodeResult out;
    out.reports.reserve(n);
    smoothed_.reset();
    for (std::size_t k = 0; k < n; ++k)
      out.reports.push_back(
          run_timestep(k, trace.start_s() + static_cast<double>(k) * cfg_.deadline_s, trace, channel));
    out.summary = summarize_episode(out.reports, all_edge_energy_j());
    return out;
  }

  static EpisodeSummary summarize_episode(const std::vector<TimestepReport>& reports, double all_edge_energy_j) {
    if (reports.empty()) throw ArgumentError("cannot summarize an empty episode");
    EpisodeSummary s;
    s.steps = reports.size();
    for (const auto& r : reports) {
      s.total_energy_j += r.energy_j;
      s.mean_latency_s += r.latency_s;
      s.max_latency_s = std::max(s.max_latency_s, r.latency_s);
      if (!r.deadline_met) ++s.deadline_misses;
      switch (r.path) {
        case StepPath::LocalFull: ++s.local_steps; break;
        case StepPath::OffloadSuccess: ++s.offload_steps; break;
        case StepPath::OffloadTimeoutRollback: ++s.rollback_steps; break;
      }
    }
    s.mean_latency_s /= static_cast<double>(s.steps);
    s.baseline_energy_j = all_edge_energy_j * static_cast<double>(s.steps);
    s.savings_pct = s.baseline_energy_j > 0.0
                        ? (s.baseline_energy_j - s.total_energy_j) / s.baseline_energy_j * 100.0
                        : 0.0;
    return s;
  }

 private:
  NetworkSample smooth(const NetworkSample& latest) {
    if (!cfg_.smoothing) return latest;
    if (!smoothed_) {
      smoothed_ = latest;
    } else {
      const double a = *cfg_.smoothing;
      smoothed_->rate_up_bps = a * latest.rate_up_bps + (1.0 - a) * smoothed_->rate_up_bps;
      smoothed_->rate_down_bps = a * latest.rate_down_bps + (1.0 - a) * smoothed_->rate_down_bps;
      smoothed_->rtt_s = a * latest.rtt_s + (1.0 - a) * smoothed_->rtt_s;
    }
    return *smoothed_;
  }

  ModelProfile model_;
  DeviceProfile device_;
  ServerProfile server_;
  RadioModel radio_;
  RuntimeConfig cfg_;
  double t_head_ = 0.0, e_head_ = 0.0, t_tail_edge_ = 0.0, e_tail_edge_ = 0.0;
  std::optional<NetworkSample> smoothed_;
};

// ---------------------------------------------------------------------------
// report export

inline void write_episode_csv(std::ostream& out, const EpisodeResult& ep) {
  out << "step,start_s,path,verdict,r_th_bps,rate_up_bps,rate_down_bps,rtt_s,"
         "lat_head_s,lat_tx_s,lat_idle_s,lat_rx_s,lat_tail_s,latency_s,"
         "e_head_j,e_comm_j,e_idle_j,e_tail_j,energy_j,deadline_met,steer,accelerator,brake\n";
  std::ostringstream row;
  row << std::setprecision(10);
  for (const auto& r : ep.reports) {
    row.str({});
    row << r.step << ',' << r.start_s << ',' << to_string(r.path) << ',' << to_string(r.verdict) << ','
        << r.r_th_bps << ',' << r.network.rate_up_bps << ',' << r.network.rate_down_bps << ','
        << r.network.rtt_s << ',' << r.latency.head << ',' << r.latency.tx << ',' << r.latency.idle << ','
        << r.latency.rx << ',' << r.latency.tail << ',' << r.latency_s << ',' << r.energy.head << ','
        << r.energy.comm << ',' << r.energy.idle << ',' << r.energy.tail << ',' << r.energy_j << ','
        << (r.deadline_met ? 1 : 0) << ',' << r.control.steer << ',' << r.control.accelerator << ','
        << r.control.brake << '\n';
    out << row.str();
  }
  const auto& s = ep.summary;
  out << "# summary\n"
      << "# steps=" << s.steps << '\n'
      << "# local_steps=" << s.local_steps << '\n'
      << "# offload_steps=" << s.offload_steps << '\n'
      << "# rollback_steps=" << s.rollback_steps << '\n'
      << "# deadline_misses=" << s.deadline_misses << '\n'
      << "# total_energy_j=" << std::setprecision(10) << s.total_energy_j << '\n'
      << "# baseline_energy_j=" << s.baseline_energy_j << '\n'
      << "# savings_pct=" << s.savings_pct << '\n'
      << "# mean_latency_s=" << s.mean_latency_s << '\n'
      << "# max_latency_s=" << s.max_latency_s << '\n';
}

}  // namespace edgesplit
