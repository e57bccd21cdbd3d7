#pragma once

// Deterministic network conditions for the simulator: traces sampled on a
// fixed grid, zero-order hold lookup, and transfer-time integration over a
// piecewise-constant rate.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "edgesplit/cost_model.hpp"
#include "edgesplit/error.hpp"
#include "edgesplit/prng.hpp"

namespace edgesplit {

struct TraceSample {
  double time_s = 0.0;
  double rate_up_bps = 0.0;
  double rate_down_bps = 0.0;
  double rtt_s = 0.0;
  bool delivered = true;

  NetworkSample network() const { return {rate_up_bps, rate_down_bps, rtt_s}; }

  friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

class NetworkTrace {
 public:
  NetworkTrace() = default;
  explicit NetworkTrace(std::vector<TraceSample> samples) : samples_(std::move(samples)) { validate(); }

  const std::vector<TraceSample>& samples() const noexcept { return samples_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }
  double start_s() const { return samples_.front().time_s; }
  double end_s() const { return samples_.back().time_s; }

  // Index of the last sample at or before t.
  std::size_t index_at(double t) const {
    if (samples_.empty()) throw TraceError("empty trace");
    if (t < samples_.front().time_s) throw TraceError("time precedes the first trace sample");
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const TraceSample& s) { return v < s.time_s; });
    return static_cast<std::size_t>(it - samples_.begin()) - 1;
  }

  // Zero-order hold; the final sample holds forever.
  const TraceSample& at(double t) const { return samples_[index_at(t)]; }

  friend bool operator==(const NetworkTrace&, const NetworkTrace&) = default;

 private:
  void validate() const {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!(s.rate_up_bps > 0.0) || !(s.rate_down_bps > 0.0))
        throw TraceError("sample " + std::to_string(i) + ": rates must be positive");
      if (!(s.rtt_s >= 0.0)) throw TraceError("sample " + std::to_string(i) + ": rtt must be >= 0");
      if (i > 0 && !(s.time_s > samples_[i - 1].time_s))
        throw TraceError("sample " + std::to_string(i) + ": times must be strictly increasing");
    }
  }

  std::vector<TraceSample> samples_;
};

inline NetworkSample sample_at(const NetworkTrace& trace, double t) { return trace.at(t).network(); }

// Seconds needed to push `bits` starting at `start_s` when the rate follows
// the trace (upload or download column).
inline double transfer_duration_s(const NetworkTrace& trace, double start_s, double bits, bool uplink = true) {
  if (bits <= 0.0) return 0.0;
  const auto& s = trace.samples();
  std::size_t i = trace.index_at(start_s);
  double t = start_s;
  double elapsed = 0.0;
  double left = bits;
  for (;;) {
    const double rate = uplink ? s[i].rate_up_bps : s[i].rate_down_bps;
    const double seg_end = (i + 1 < s.size()) ? s[i + 1].time_s : std::numeric_limits<double>::infinity();
    const double capacity = rate * (seg_end - t);
    if (capacity >= left) return elapsed + left / rate;
    left -= capacity;
    elapsed += seg_end - t;
    t = seg_end;
    ++i;
  }
}

// ---------------------------------------------------------------------------
// generators

enum class TraceKind { Constant, Step, RandomWalk, Markov };

inline TraceKind trace_kind_from_string(std::string_view s) {
  if (s == "constant") return TraceKind::Constant;
  if (s == "step") return TraceKind::Step;
  if (s == "random_walk" || s == "randomwalk") return TraceKind::RandomWalk;
  if (s == "markov") return TraceKind::Markov;
  throw ArgumentError("unknown trace kind '" + std::string(s) + "'");
}

struct TraceGeneratorConfig {
  TraceKind kind = TraceKind::Constant;
  std::uint64_t seed = 0;
  double duration_s = 1.0;
  double sample_period_s = 0.1;
  double rtt_s = 0.005;
  // Downlink rate as a multiple of the uplink rate.
  double down_to_up_ratio = 1.0;
  // Probability that a sample's offload is lost (server never answers).
  double loss_probability = 0.0;

  // Constant / RandomWalk starting point
  double mean_rate_bps = 10e6;

  // Step: rate is `step_before_bps` for t < step_time_s, `step_after_bps` after
  double step_time_s = 0.0;
  double step_before_bps = 10e6;
  double step_after_bps = 1e6;

  // RandomWalk: log-rate moves by volatility * N(0,1) per sample, clamped
  double walk_volatility = 0.1;
  double walk_min_bps = 1e4;
  double walk_max_bps = 1e9;

  // Markov: one rate per state, row-stochastic transition matrix
  std::vector<double> state_rates_bps;
  std::vector<std::vector<double>> transitions;
  std::size_t initial_state = 0;

  void validate() const {
    if (!(sample_period_s > 0.0)) throw ArgumentError("sample_period_s must be > 0");
    if (!(duration_s > 0.0)) throw ArgumentError("duration_s must be > 0");
    if (!(rtt_s >= 0.0)) throw ArgumentError("rtt_s must be >= 0");
    if (!(down_to_up_ratio > 0.0)) throw ArgumentError("down_to_up_ratio must be > 0");
    if (!(loss_probability >= 0.0 && loss_probability <= 1.0))
      throw ArgumentError("loss_probability must lie in [0, 1]");
    switch (kind) {
      case TraceKind::Constant:
        if (!(mean_rate_bps > 0.0)) throw ArgumentError("mean_rate_bps must be > 0");
        break;
      case TraceKind::Step:
        if (!(step_before_bps > 0.0 && step_after_bps > 0.0)) throw ArgumentError("step levels must be > 0");
        break;
      case TraceKind::RandomWalk:
        if (!(mean_rate_bps > 0.0 && walk_min_bps > 0.0 && walk_min_bps <= walk_max_bps))
          throw ArgumentError("random walk needs 0 < walk_min_bps <= walk_max_bps and mean_rate_bps > 0");
        if (!(walk_volatility >= 0.0)) throw ArgumentError("walk_volatility must be >= 0");
        break;
      case TraceKind::Markov: {
        const std::size_t n = state_rates_bps.size();
        if (n == 0 || transitions.size() != n) throw ArgumentError("markov needs n rates and an n x n matrix");
        if (initial_state >= n) throw ArgumentError("markov initial_state out of range");
        for (std::size_t i = 0; i < n; ++i) {
          if (!(state_rates_bps[i] > 0.0)) throw ArgumentError("markov state rates must be > 0");
          if (transitions[i].size() != n) throw ArgumentError("markov transition matrix must be square");
          double sum = 0.0;
          for (double p : transitions[i]) {
            if (!(p >= 0.0)) throw ArgumentError("markov probabilities must be >= 0");
            sum += p;
          }
          if (std::fabs(sum - 1.0) > 1e-9) throw ArgumentError("markov transition rows must sum to 1");
        }
        break;
      }
    }
  }
};

// Samples at t = i * sample_period_s for i in [0, round(duration / period)).
inline NetworkTrace generate_trace(const TraceGeneratorConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s / cfg.sample_period_s));
  if (n == 0) throw ArgumentError("duration shorter than one sample period");

  SplitMix64 rate_rng(cfg.seed);
  SplitMix64 loss_rng(mix_seed(cfg.seed, 0x6C6F7373ULL));
  double walk = cfg.mean_rate_bps;
  std::size_t state = cfg.initial_state;

  std::vector<TraceSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * cfg.sample_period_s;
    double rate = 0.0;
    switch (cfg.kind) {
      case TraceKind::Constant:
        rate = cfg.mean_rate_bps;
        break;
      case TraceKind::Step:
        rate = t < cfg.step_time_s ? cfg.step_before_bps : cfg.step_after_bps;
        break;
      case TraceKind::RandomWalk:
        if (i > 0) walk = std::clamp(walk * std::exp(cfg.walk_volatility * rate_rng.normal()),
                                     cfg.walk_min_bps, cfg.walk_max_bps);
        rate = walk;
        break;
      case TraceKind::Markov:
        if (i > 0) {
          const double u = rate_rng.uniform();
          double acc = 0.0;
          std::size_t next = cfg.transitions[state].size() - 1;
          for (std::size_t j = 0; j < cfg.transitions[state].size(); ++j) {
            acc += cfg.transitions[state][j];
            if (u < acc) {
              next = j;
              break;
            }
          }
          state = next;
        }
        rate = cfg.state_rates_bps[state];
        break;
    }
    const bool delivered = cfg.loss_probability == 0.0 || loss_rng.uniform() >= cfg.loss_probability;
    out.push_back({t, rate, rate * cfg.down_to_up_ratio, cfg.rtt_s, delivered});
  }
  return NetworkTrace(std::move(out));
}

// ---------------------------------------------------------------------------
// CSV: time_s,rate_up_bps,rate_down_bps,rtt_s[,delivered]
//
// An empty rate_down_bps field, or a 3-column header
// `time_s,rate_up_bps,rtt_s`, means the downlink runs at the uplink rate.

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line_no, const char* what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw TraceError("line " + std::to_string(line_no) + ": bad " + what + " '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline NetworkTrace parse_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceError("missing header line");
  const auto header = detail::split_commas(line);
  bool three_col = false;
  if (header.size() == 3 && header[0] == "time_s" && header[1] == "rate_up_bps" && header[2] == "rtt_s") {
    three_col = true;
  } else if (header.size() < 4 || header[0] != "time_s" || header[1] != "rate_up_bps" ||
             header[2] != "rate_down_bps" || header[3] != "rtt_s" ||
             (header.size() == 5 && header[4] != "delivered") || header.size() > 5) {
    throw TraceError("header must be time_s,rate_up_bps,rate_down_bps,rtt_s[,delivered]");
  }

  std::vector<TraceSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_commas(line);
    TraceSample s;
    if (three_col) {
      if (f.size() != 3) throw TraceError("line " + std::to_string(line_no) + ": expected 3 fields");
      s.time_s = detail::parse_double(f[0], line_no, "time_s");
      s.rate_up_bps = detail::parse_double(f[1], line_no, "rate_up_bps");
      s.rate_down_bps = s.rate_up_bps;
      s.rtt_s = detail::parse_double(f[2], line_no, "rtt_s");
    } else {
      if (f.size() != header.size())
        throw TraceError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                         " fields");
      s.time_s = detail::parse_double(f[0], line_no, "time_s");
      s.rate_up_bps = detail::parse_double(f[1], line_no, "rate_up_bps");
      s.rate_down_bps = f[2].empty() ? s.rate_up_bps : detail::parse_double(f[2], line_no, "rate_down_bps");
      s.rtt_s = detail::parse_double(f[3], line_no, "rtt_s");
      if (f.size() == 5) {
        if (f[4] == "1" || f[4] == "true") s.delivered = true;
        else if (f[4] == "0" || f[4] == "false") s.delivered = false;
        else throw TraceError("line " + std::to_string(line_no) + ": delivered must be 0/1");
      }
    }
    samples.push_back(s);
  }
  return NetworkTrace(std::move(samples));
}

inline NetworkTrace load_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace '" + path.string() + "'");
  return parse_trace_csv(in);
}

inline void write_trace_csv(std::ostream& out, const NetworkTrace& trace) {
  out << "time_s,rate_up_bps,rate_down_bps,rtt_s,delivered\n";
  std::ostringstream row;
  row << std::setprecision(17);
  for (const auto& s : trace.samples()) {
    row.str({});
    row << s.time_s << ',' << s.rate_up_bps << ',' << s.rate_down_bps << ',' << s.rtt_s << ','
        << (s.delivered ? 1 : 0) << '\n';
    out << row.str();
  }
}

inline void save_trace_csv(const std::filesystem::path& path, const NetworkTrace& trace) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot write trace '" + path.string() + "'");
  write_trace_csv(out, trace);
}

}  // namespace edgesplit
