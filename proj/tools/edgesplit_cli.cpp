// edgesplit command-line front end: rate sweeps, episodes, split-point scans,
// and the offload server/client pair.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgesplit/edgesplit.hpp"

using namespace edgesplit;

namespace {

std::atomic<bool> g_keep_running{true};

extern "C" void on_signal(int) { g_keep_running = false; }

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw ArgumentError("cannot open output file '" + path + "'");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

ProfileBundle require_profile(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ArgumentError("--profile is required");
  return load_profile(paths.front());
}

struct TraceOptions {
  std::string kind = "constant";
  std::string csv;
  double rate_bps = 10e6;
  double duration_s = 100.0;
  double period_s = 0.1;
  double rtt_s = 0.005;
  double down_ratio = 1.0;
  double loss = 0.0;
  double step_time_s = 50.0;
  double step_after_bps = 1e5;
  double volatility = 0.1;
  std::vector<double> markov_rates{1e5, 5e6, 50e6};
  double markov_stay = 0.9;

  void add_to(CLI::App* app) {
    app->add_option("--trace", kind, "Generated trace kind: constant, step, random_walk, markov")
        ->check(CLI::IsMember({"constant", "step", "random_walk", "markov"}));
    app->add_option("--trace-csv", csv, "Read the trace from a CSV file instead of generating one");
    app->add_option("--rate", rate_bps, "Uplink rate in bit/s (constant, start of step/random walk)");
    app->add_option("--duration", duration_s, "Generated trace length in seconds");
    app->add_option("--period", period_s, "Trace sample period in seconds");
    app->add_option("--rtt", rtt_s, "Round-trip time in seconds");
    app->add_option("--down-ratio", down_ratio, "Downlink rate as a multiple of the uplink rate");
    app->add_option("--loss", loss, "Probability that a sample loses its offload");
    app->add_option("--step-time", step_time_s, "Step trace: switch time in seconds");
    app->add_option("--step-after", step_after_bps, "Step trace: rate after the switch");
    app->add_option("--volatility", volatility, "Random walk: log-rate standard deviation per sample");
    app->add_option("--markov-rates", markov_rates, "Markov trace: rate of each state");
    app->add_option("--markov-stay", markov_stay, "Markov trace: probability of staying in a state");
  }

  NetworkTrace make(std::uint64_t seed) const {
    if (!csv.empty()) return load_trace_csv(csv);
    TraceGeneratorConfig cfg;
    cfg.kind = trace_kind_from_string(kind);
    cfg.seed = seed;
    cfg.duration_s = duration_s;
    cfg.sample_period_s = period_s;
    cfg.rtt_s = rtt_s;
    cfg.down_to_up_ratio = down_ratio;
    cfg.loss_probability = loss;
    cfg.mean_rate_bps = rate_bps;
    cfg.step_time_s = step_time_s;
    cfg.step_before_bps = rate_bps;
    cfg.step_after_bps = step_after_bps;
    cfg.walk_volatility = volatility;
    if (cfg.kind == TraceKind::Markov) {
      const std::size_t n = markov_rates.size();
      cfg.state_rates_bps = markov_rates;
      cfg.transitions.assign(n, std::vector<double>(n, n > 1 ? (1.0 - markov_stay) / static_cast<double>(n - 1) : 0.0));
      for (std::size_t i = 0; i < n; ++i) cfg.transitions[i][i] = n > 1 ? markov_stay : 1.0;
    }
    return generate_trace(cfg);
  }
};

void print_episode_summary(std::ostream& out, const EpisodeSummary& s) {
  out << std::setprecision(6) << "steps=" << s.steps << " local=" << s.local_steps << " offload=" << s.offload_steps
      << " rollback=" << s.rollback_steps << " deadline_misses=" << s.deadline_misses
      << " energy_j=" << s.total_energy_j << " baseline_j=" << s.baseline_energy_j
      << " savings_pct=" << s.savings_pct << " mean_latency_ms=" << s.mean_latency_s * 1e3
      << " max_latency_ms=" << s.max_latency_s * 1e3 << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge/cloud split-inference offloading simulator"};
  app.require_subcommand(1);

  std::vector<std::string> profiles;
  std::uint64_t seed = 42;
  app.add_option("--profile", profiles, "Profile JSON file (repeat for serve)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for traces and synthetic head outputs");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Evaluate the offload decision over a grid of uplink rates");
  SweepConfig sweep_cfg;
  double sweep_down = 10e6;
  bool sweep_linear = false;
  std::string sweep_out;
  sweep->add_option("--start", sweep_cfg.grid.start_bps, "First rate in bit/s");
  sweep->add_option("--stop", sweep_cfg.grid.stop_bps, "Last rate in bit/s");
  sweep->add_option("--points", sweep_cfg.grid.points, "Number of grid points");
  sweep->add_flag("--linear", sweep_linear, "Linear instead of logarithmic spacing");
  sweep->add_option("--bits", sweep_cfg.quant_bits, "Bottleneck quantization widths (8, 16, 32)")
      ->check(CLI::IsMember({8, 16, 32}));
  sweep->add_option("--rtt", sweep_cfg.rtt_s, "Round-trip time in seconds");
  sweep->add_option("--down", sweep_down, "Downlink rate in bit/s; 0 follows the uplink rate");
  sweep->add_option("--deadline", sweep_cfg.deadline_s, "Per-step deadline in seconds");
  sweep->add_option("--out", sweep_out, "CSV output path (default stdout)");

  // episode
  auto* episode = app.add_subcommand("episode", "Run the per-timestep runtime over a network trace");
  TraceOptions trace_opts;
  trace_opts.add_to(episode);
  RuntimeConfig rt_cfg;
  std::optional<std::size_t> steps;
  std::string fault = "none", episode_server, episode_out;
  double fault_delay = 0.0;
  episode->add_option("--steps", steps, "Number of control steps (default: cover the trace)");
  episode->add_option("--bits", rt_cfg.quant_bits, "Bottleneck quantization width")->check(CLI::IsMember({8, 16, 32}));
  episode->add_option("--epsilon", rt_cfg.epsilon_s, "Fail-safe margin in seconds");
  episode->add_option("--deadline", rt_cfg.deadline_s, "Control period and deadline in seconds");
  episode->add_option("--smoothing", rt_cfg.smoothing, "EWMA weight of the newest rate sample");
  episode->add_option("--speed", rt_cfg.speed_mps, "Vehicle speed fed to the controller");
  episode->add_option("--fault", fault, "Simulated server fault: none, drop, delay")
      ->check(CLI::IsMember({"none", "drop", "delay"}));
  episode->add_option("--fault-delay", fault_delay, "Extra server delay in seconds for --fault delay");
  episode->add_option("--server", episode_server, "Offload to a live server at host:port instead of simulating");
  episode->add_option("--out", episode_out, "CSV output path (default stdout)");

  // scan
  auto* scan = app.add_subcommand("scan", "Latency and payload of every split point");
  NetworkSample scan_net{10e6, 10e6, 0.005};
  scan->add_option("--rate", scan_net.rate_up_bps, "Uplink rate in bit/s");
  scan->add_option("--down", scan_net.rate_down_bps, "Downlink rate in bit/s");
  scan->add_option("--rtt", scan_net.rtt_s, "Round-trip time in seconds");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the offload server for the given profiles");
  std::string listen = "127.0.0.1:7878", serve_fault = "none";
  double serve_delay = 0.0;
  serve->add_option("--listen", listen, "Listen address host:port");
  serve->add_option("--fault", serve_fault, "Injected fault: none, drop, delay")
      ->check(CLI::IsMember({"none", "drop", "delay"}));
  serve->add_option("--fault-delay", serve_delay, "Extra delay in seconds for --fault delay");

  // client
  auto* client = app.add_subcommand("client", "Send offload requests to a running server");
  std::string client_server = "127.0.0.1:7878";
  std::size_t client_steps = 10;
  int client_bits = 32;
  double client_timeout = 0.1;
  client->add_option("--server", client_server, "Server address host:port");
  client->add_option("--steps", client_steps, "Number of requests");
  client->add_option("--bits", client_bits, "Bottleneck quantization width")->check(CLI::IsMember({8, 16, 32}));
  client->add_option("--timeout", client_timeout, "Per-request timeout in seconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) {
      const auto b = require_profile(profiles);
      sweep_cfg.grid.log_spaced = !sweep_linear;
      sweep_cfg.rate_down_bps = sweep_down > 0.0 ? std::optional<double>(sweep_down) : std::nullopt;
      const auto rows = sweep_rates(b, sweep_cfg);
      Output out(sweep_out);
      write_sweep_csv(out.stream(), rows);
      for (int bits : sweep_cfg.quant_bits) {
        std::vector<SweepRow> part;
        for (const auto& r : rows)
          if (r.quant_bits == bits) part.push_back(r);
        std::cerr << "# " << b.model.name << " on " << b.device.name << ", " << bits << "-bit\n";
        write_sweep_summary(std::cerr, summarize(part, b));
      }
    } else if (episode->parsed()) {
      const auto b = require_profile(profiles);
      rt_cfg.seed = seed;
      const auto trace = trace_opts.make(seed);
      EdgeRuntime rt(b.model, b.device, b.server, b.radio, rt_cfg);
      EpisodeResult ep;
      if (!episode_server.empty()) {
        auto conn = ClientConnection::connect(parse_endpoint(episode_server));
        SocketChannel ch(conn);
        ep = rt.run_episode(trace, ch, steps);
      } else {
        SimulatedChannel ch(trace, {{b.model.model_id, server_model_for(b.model, b.server)}},
                            {fault_mode_from_string(fault), fault_delay});
        ep = rt.run_episode(trace, ch, steps);
      }
      Output out(episode_out);
      write_episode_csv(out.stream(), ep);
      print_episode_summary(std::cerr, ep.summary);
    } else if (scan->parsed()) {
      const auto b = require_profile(profiles);
      std::cout << "k_p,latency_s,payload_bytes,transmission_s,bottleneck\n" << std::setprecision(10);
      for (const auto& s : scan_split_points(b.model, b.device, b.server, scan_net, b.radio))
        std::cout << s.k_p << ',' << s.latency_s << ',' << s.payload_bytes << ',' << s.transmission_s << ','
                  << (s.k_p == b.model.bottleneck_index ? 1 : 0) << '\n';
    } else if (serve->parsed()) {
      if (profiles.empty()) throw ArgumentError("--profile is required");
      ServerConfig cfg;
      cfg.listen = parse_endpoint(listen);
      cfg.faults = {fault_mode_from_string(serve_fault), serve_delay};
      for (const auto& p : profiles) {
        const auto b = load_profile(p);
        cfg.models[b.model.model_id] = server_model_for(b.model, b.server);
      }
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      OffloadServer server(cfg);
      server.start();
      std::cerr << "listening on " << cfg.listen.host << ':' << server.port() << " with " << cfg.models.size()
                << " model(s)\n";
      server.wait(g_keep_running);
      server.stop();
      std::cerr << "served " << server.requests_served() << " request(s)\n";
    } else if (client->parsed()) {
      const auto b = require_profile(profiles);
      auto conn = ClientConnection::connect(parse_endpoint(client_server));
      std::cout << "step,status,round_trip_ms,steer,accelerator,brake\n" << std::setprecision(7);
      int failures = 0;
      for (std::size_t k = 0; k < client_steps; ++k) {
        wire::RequestFrame req;
        req.timestep = k;
        req.model_id = b.model.model_id;
        req.command = static_cast<std::uint8_t>(k % kBranchCount);
        req.speed = 8.0f;
        req.quant_bits = static_cast<std::uint8_t>(client_bits);
        for (const auto& t : synthesize_bottleneck(b.model, seed, k)) req.tensors.push_back(quantize(t, client_bits));
        const auto t0 = Clock::now();
        const auto reply = conn.offload(
            req, t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(client_timeout)));
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        const bool ok = reply.status == ReplyStatus::Ok;
        failures += !ok;
        std::cout << k << ',' << (ok ? "ok" : reply.connection_lost ? "lost" : "timeout") << ',' << ms << ','
                  << reply.control.steer << ',' << reply.control.accelerator << ',' << reply.control.brake << '\n';
        if (reply.connection_lost) break;
      }
      return failures == 0 ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "edgesplit: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
