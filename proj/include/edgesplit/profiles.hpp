#pragma once

// Device, server, radio and model profiles, plus the profile file schema.
//
// Partition indices are 1-based throughout the library: a split at k_p runs
// stages 1..k_p on the edge and k_p+1..K remotely, so k_p == K is pure local
// execution.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgesplit/error.hpp"
#include "edgesplit/radio.hpp"

namespace edgesplit {

inline constexpr int kProfileSchemaVersion = 1;

// Per-tensor dequantization metadata carried with every quantized tensor
// (scale and zero point as two 32-bit values).
inline constexpr std::uint64_t kQuantHeaderBytes = 8;

struct SubTaskCost {
  std::string name;
  std::optional<double> cycles;
  std::optional<double> measured_edge_latency_s;
  std::optional<double> measured_cloud_latency_s;
  std::optional<double> measured_edge_energy_j;
  std::uint64_t output_bytes = 0;

  friend bool operator==(const SubTaskCost&, const SubTaskCost&) = default;
};

struct TensorShape {
  std::uint16_t channels = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;

  std::uint64_t elements() const noexcept {
    return std::uint64_t{channels} * height * width;
  }

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

// Reference totals of one measured hardware row (E2E / head / tail). Kept so
// profiles transcribed from measurements can be audited after load.
struct MeasuredTotals {
  double e2e_latency_s = 0.0;
  double head_latency_s = 0.0;
  double tail_latency_s = 0.0;
  double e2e_energy_j = 0.0;
  double head_energy_j = 0.0;
  std::optional<double> e2e_power_w;
  std::optional<double> head_power_w;
  std::optional<double> server_tail_latency_s;

  friend bool operator==(const MeasuredTotals&, const MeasuredTotals&) = default;
};

struct ModelProfile {
  std::string name;
  std::uint16_t model_id = 0;
  std::vector<SubTaskCost> subtasks;
  std::size_t bottleneck_index = 1;  // 1-based
  std::uint64_t result_bytes = 0;
  std::uint32_t num_cameras = 1;
  std::uint64_t element_count_at_bottleneck = 0;
  TensorShape bottleneck_shape;  // per camera
  bool bottleneck_bytes_estimated = false;
  std::uint64_t tail_seed = 0;
  std::optional<MeasuredTotals> reference;

  std::size_t stage_count() const noexcept { return subtasks.size(); }

  // 1-based stage access.
  const SubTaskCost& stage(std::size_t k) const { return subtasks.at(k - 1); }

  friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

struct DeviceProfile {
  std::string name;
  double frequency_hz = 0.0;
  std::optional<double> energy_per_cycle_j;
  double idle_power_w = 0.0;
  std::optional<double> active_power_w;

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

struct ServerProfile {
  std::string name;
  double frequency_hz = 0.0;
  std::optional<double> fixed_tail_latency_s;

  friend bool operator==(const ServerProfile&, const ServerProfile&) = default;
};

// What a split at k_p ships and leaves for the server.
struct TaskSpec {
  std::size_t partition = 0;
  std::uint64_t upload_bytes = 0;
  std::uint64_t download_bytes = 0;
  std::vector<SubTaskCost> remote_work;  // stages k_p+1..K
  int quant_bits = 32;
};

// One profile file: everything needed to cost a single (model, device) pair.
struct ProfileBundle {
  DeviceProfile device;
  ServerProfile server;
  RadioModel radio;
  ModelProfile model;

  friend bool operator==(const ProfileBundle&, const ProfileBundle&) = default;
};

inline bool valid_quant_bits(int bits) noexcept { return bits == 8 || bits == 16 || bits == 32; }

// ---------------------------------------------------------------------------
// validation

namespace detail {

inline void require_non_negative(const std::optional<double>& v, const std::string& field) {
  if (v && (!std::isfinite(*v) || *v < 0.0)) throw ProfileError("must be finite and >= 0", field);
}

inline void require_non_negative(double v, const std::string& field) {
  if (!std::isfinite(v) || v < 0.0) throw ProfileError("must be finite and >= 0", field);
}

}  // namespace detail

inline void validate(const ModelProfile& m) {
  if (m.subtasks.empty()) throw ProfileError("at least one stage is required", "model.subtasks");
  for (std::size_t i = 0; i < m.subtasks.size(); ++i) {
    const auto& s = m.subtasks[i];
    const std::string f = "model.subtasks[" + std::to_string(i) + "]";
    if (!s.cycles && !s.measured_edge_latency_s)
      throw ProfileError("needs either cycles or measured_edge_latency_s", f);
    detail::require_non_negative(s.cycles, f + ".cycles");
    detail::require_non_negative(s.measured_edge_latency_s, f + ".measured_edge_latency_s");
    detail::require_non_negative(s.measured_cloud_latency_s, f + ".measured_cloud_latency_s");
    detail::require_non_negative(s.measured_edge_energy_j, f + ".measured_edge_energy_j");
  }
  const std::size_t K = m.stage_count();
  if (m.bottleneck_index < 1 || m.bottleneck_index > K)
    throw ProfileError("must lie in [1, " + std::to_string(K) + "]", "model.bottleneck_index");
  if (m.num_cameras < 1) throw ProfileError("must be >= 1", "model.num_cameras");
  if (m.stage(m.bottleneck_index).output_bytes != m.element_count_at_bottleneck * 4)
    throw ProfileError("bottleneck stage output_bytes must equal element_count_at_bottleneck * 4",
                       "model.element_count_at_bottleneck");
  if (m.bottleneck_shape.elements() * m.num_cameras != m.element_count_at_bottleneck)
    throw ProfileError("num_cameras * channels * height * width must equal element_count_at_bottleneck",
                       "model.bottleneck_shape");
  if (m.reference) {
    const auto& r = *m.reference;
    for (auto [v, f] : {std::pair{r.e2e_latency_s, "e2e_latency_s"}, {r.head_latency_s, "head_latency_s"},
                        {r.tail_latency_s, "tail_latency_s"}, {r.e2e_energy_j, "e2e_energy_j"},
                        {r.head_energy_j, "head_energy_j"}})
      detail::require_non_negative(v, std::string("model.reference.") + f);
  }
}

inline void validate(const DeviceProfile& d) {
  detail::require_non_negative(d.frequency_hz, "device.frequency_hz");
  detail::require_non_negative(d.idle_power_w, "device.idle_power_w");
  detail::require_non_negative(d.energy_per_cycle_j, "device.energy_per_cycle_j");
  detail::require_non_negative(d.active_power_w, "device.active_power_w");
}

inline void validate(const ServerProfile& s) {
  detail::require_non_negative(s.frequency_hz, "server.frequency_hz");
  detail::require_non_negative(s.fixed_tail_latency_s, "server.fixed_tail_latency_s");
}

inline void validate(const ProfileBundle& b) {
  validate(b.device);
  validate(b.server);
  validate(b.model);
  try {
    b.radio.validate();
  } catch (const ArgumentError& e) {
    throw ProfileError(e.what(), "radio");
  }
}

// ---------------------------------------------------------------------------
// partition payloads

// Upload/download sizes and remote work of a split at `k_p`. Quantization
// below 32 bits is only defined for the bottleneck split; it scales the
// payload by bits/32 and adds one dequantization header per camera tensor.
inline TaskSpec derive_task_spec(const ModelProfile& model, std::size_t k_p, int quant_bits = 32) {
  const std::size_t K = model.stage_count();
  if (k_p < 1 || k_p > K)
    throw ArgumentError("partition index " + std::to_string(k_p) + " outside [1, " + std::to_string(K) + "]");
  if (!valid_quant_bits(quant_bits)) throw ArgumentError("quant_bits must be 8, 16 or 32");
  if (quant_bits < 32 && k_p != model.bottleneck_index)
    throw ArgumentError("quantization is only supported at the bottleneck split");

  TaskSpec t;
  t.partition = k_p;
  t.quant_bits = quant_bits;
  if (k_p == K) return t;

  const std::uint64_t full = model.stage(k_p).output_bytes;
  if (quant_bits == 32) {
    t.upload_bytes = full;
  } else {
    t.upload_bytes = full * static_cast<std::uint64_t>(quant_bits) / 32 +
                     kQuantHeaderBytes * model.num_cameras;
  }
  t.download_bytes = model.result_bytes;
  t.remote_work.assign(model.subtasks.begin() + static_cast<std::ptrdiff_t>(k_p), model.subtasks.end());
  return t;
}

// ---------------------------------------------------------------------------
// JSON schema

namespace detail {

using nlohmann::json;

template <class T>
std::optional<T> opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

template <class T>
T req(const json& j, const char* key, const std::string& section) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw ProfileError("missing required field", section + "." + key);
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw ProfileError(std::string("wrong type: ") + e.what(), section + "." + key);
  }
}

template <class T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

inline const json& section(const json& root, const char* name) {
  auto it = root.find(name);
  if (it == root.end() || !it->is_object()) throw ProfileError("missing section", name);
  return *it;
}

inline AffinePower affine_from_json(const json& j, const std::string& f) {
  return {req<double>(j, "base_w", f), req<double>(j, "per_bps_w", f)};
}

}  // namespace detail

inline ProfileBundle profile_from_json(const nlohmann::json& root) {
  using namespace detail;
  ProfileBundle b;
  try {
    const int version = req<int>(root, "schema_version", "root");
    if (version != kProfileSchemaVersion)
      throw ProfileError("unsupported schema version " + std::to_string(version), "schema_version");

    const json& dev = section(root, "device");
    b.device.name = req<std::string>(dev, "name", "device");
    b.device.frequency_hz = opt<double>(dev, "frequency_hz").value_or(0.0);
    b.device.energy_per_cycle_j = opt<double>(dev, "energy_per_cycle_j");
    b.device.idle_power_w = req<double>(dev, "idle_power_w", "device");
    b.device.active_power_w = opt<double>(dev, "active_power_w");

    const json& srv = section(root, "server");
    b.server.name = req<std::string>(srv, "name", "server");
    b.server.frequency_hz = opt<double>(srv, "frequency_hz").value_or(0.0);
    b.server.fixed_tail_latency_s = opt<double>(srv, "fixed_tail_latency_s");

    const json& rad = section(root, "radio");
    const auto tech = radio_technology_from_string(req<std::string>(rad, "technology", "radio"));
    b.radio = RadioModel::defaults(tech);
    if (rad.contains("tx")) b.radio.tx = affine_from_json(rad["tx"], "radio.tx");
    if (rad.contains("rx")) b.radio.rx = affine_from_json(rad["rx"], "radio.rx");
    if (tech == RadioTechnology::Custom && (!rad.contains("tx") || !rad.contains("rx")))
      throw ProfileError("custom radio needs explicit tx and rx", "radio");

    const json& mod = section(root, "model");
    ModelProfile& m = b.model;
    m.name = req<std::string>(mod, "name", "model");
    m.model_id = req<std::uint16_t>(mod, "model_id", "model");
    m.bottleneck_index = req<std::size_t>(mod, "bottleneck_index", "model");
    m.result_bytes = req<std::uint64_t>(mod, "result_bytes", "model");
    m.num_cameras = opt<std::uint32_t>(mod, "num_cameras").value_or(1);
    m.element_count_at_bottleneck = req<std::uint64_t>(mod, "element_count_at_bottleneck", "model");
    m.bottleneck_bytes_estimated = opt<bool>(mod, "bottleneck_bytes_estimated").value_or(false);
    m.tail_seed = opt<std::uint64_t>(mod, "tail_seed").value_or(m.model_id);

    if (auto shape = mod.find("bottleneck_shape"); shape != mod.end()) {
      if (!shape->is_array() || shape->size() != 3)
        throw ProfileError("expected [channels, height, width]", "model.bottleneck_shape");
      m.bottleneck_shape = {(*shape)[0].get<std::uint16_t>(), (*shape)[1].get<std::uint16_t>(),
                            (*shape)[2].get<std::uint16_t>()};
    } else {
      const std::uint64_t per_cam = m.num_cameras ? m.element_count_at_bottleneck / m.num_cameras : 0;
      if (per_cam > 0xFFFF) throw ProfileError("required when per-camera elements exceed 65535",
                                               "model.bottleneck_shape");
      m.bottleneck_shape = {1, 1, static_cast<std::uint16_t>(per_cam)};
    }

    const json& stages = req<json>(mod, "subtasks", "model");
    if (!stages.is_array()) throw ProfileError("must be an array", "model.subtasks");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const json& s = stages[i];
      const std::string f = "model.subtasks[" + std::to_string(i) + "]";
      SubTaskCost c;
      c.name = opt<std::string>(s, "name").value_or("");
      c.cycles = opt<double>(s, "cycles");
      c.measured_edge_latency_s = opt<double>(s, "measured_edge_latency_s");
      c.measured_cloud_latency_s = opt<double>(s, "measured_cloud_latency_s");
      c.measured_edge_energy_j = opt<double>(s, "measured_edge_energy_j");
      c.output_bytes = req<std::uint64_t>(s, "output_bytes", f);
      m.subtasks.push_back(std::move(c));
    }

    if (auto r = mod.find("reference"); r != mod.end()) {
      MeasuredTotals t;
      t.e2e_latency_s = req<double>(*r, "e2e_latency_s", "model.reference");
      t.head_latency_s = req<double>(*r, "head_latency_s", "model.reference");
      t.tail_latency_s = req<double>(*r, "tail_latency_s", "model.reference");
      t.e2e_energy_j = req<double>(*r, "e2e_energy_j", "model.reference");
      t.head_energy_j = req<double>(*r, "head_energy_j", "model.reference");
      t.e2e_power_w = opt<double>(*r, "e2e_power_w");
      t.head_power_w = opt<double>(*r, "head_power_w");
      t.server_tail_latency_s = opt<double>(*r, "server_tail_latency_s");
      m.reference = t;
    }
  } catch (const json::exception& e) {
    throw ProfileError(std::string("malformed profile: ") + e.what());
  }
  validate(b);
  return b;
}

inline nlohmann::json profile_to_json(const ProfileBundle& b) {
  using nlohmann::json;
  json root;
  root["schema_version"] = kProfileSchemaVersion;

  json& dev = root["device"];
  dev["name"] = b.device.name;
  dev["frequency_hz"] = b.device.frequency_hz;
  detail::put_opt(dev, "energy_per_cycle_j", b.device.energy_per_cycle_j);
  dev["idle_power_w"] = b.device.idle_power_w;
  detail::put_opt(dev, "active_power_w", b.device.active_power_w);

  json& srv = root["server"];
  srv["name"] = b.server.name;
  srv["frequency_hz"] = b.server.frequency_hz;
  detail::put_opt(srv, "fixed_tail_latency_s", b.server.fixed_tail_latency_s);

  json& rad = root["radio"];
  rad["technology"] = std::string(to_string(b.radio.technology));
  rad["tx"] = {{"base_w", b.radio.tx.base_w}, {"per_bps_w", b.radio.tx.per_bps_w}};
  rad["rx"] = {{"base_w", b.radio.rx.base_w}, {"per_bps_w", b.radio.rx.per_bps_w}};

  const ModelProfile& m = b.model;
  json& mod = root["model"];
  mod["name"] = m.name;
  mod["model_id"] = m.model_id;
  mod["bottleneck_index"] = m.bottleneck_index;
  mod["result_bytes"] = m.result_bytes;
  mod["num_cameras"] = m.num_cameras;
  mod["element_count_at_bottleneck"] = m.element_count_at_bottleneck;
  mod["bottleneck_shape"] = {m.bottleneck_shape.channels, m.bottleneck_shape.height, m.bottleneck_shape.width};
  mod["bottleneck_bytes_estimated"] = m.bottleneck_bytes_estimated;
  mod["tail_seed"] = m.tail_seed;
  json stages = json::array();
  for (const auto& s : m.subtasks) {
    json js;
    js["name"] = s.name;
    detail::put_opt(js, "cycles", s.cycles);
    detail::put_opt(js, "measured_edge_latency_s", s.measured_edge_latency_s);
    detail::put_opt(js, "measured_cloud_latency_s", s.measured_cloud_latency_s);
    detail::put_opt(js, "measured_edge_energy_j", s.measured_edge_energy_j);
    js["output_bytes"] = s.output_bytes;
    stages.push_back(std::move(js));
  }
  mod["subtasks"] = std::move(stages);
  if (m.reference) {
    const auto& r = *m.reference;
    json& jr = mod["reference"];
    jr["e2e_latency_s"] = r.e2e_latency_s;
    jr["head_latency_s"] = r.head_latency_s;
    jr["tail_latency_s"] = r.tail_latency_s;
    jr["e2e_energy_j"] = r.e2e_energy_j;
    jr["head_energy_j"] = r.head_energy_j;
    detail::put_opt(jr, "e2e_power_w", r.e2e_power_w);
    detail::put_opt(jr, "head_power_w", r.head_power_w);
    detail::put_opt(jr, "server_tail_latency_s", r.server_tail_latency_s);
  }
  return root;
}

inline ProfileBundle parse_profile(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProfileError(std::string("parse failure: ") + e.what());
  }
  return profile_from_json(j);
}

inline ProfileBundle load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProfileError("cannot open profile '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

inline ModelProfile load_model_profile(const std::filesystem::path& path) {
  return load_profile(path).model;
}

inline std::string serialize_profile(const ProfileBundle& b) { return profile_to_json(b).dump(2) + "\n"; }

inline void save_profile(const ProfileBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ProfileError("cannot write profile '" + path.string() + "'");
  out << serialize_profile(b);
}

}  // namespace edgesplit
