#pragma once

#include <string>

#include "edgesplit/profiles.hpp"

namespace testing_support {

inline std::string profile_path(const std::string& name) {
  return std::string(EDGESPLIT_PROFILE_DIR) + "/" + name + ".json";
}

inline edgesplit::ProfileBundle load(const std::string& name) { return edgesplit::load_profile(profile_path(name)); }

inline const char* const kHardwareTable[] = {"tx2_densenet169", "px2_densenet169", "tx2_resnet34",
                                             "px2_resnet34",    "tx2_resnet50",    "px2_resnet50",
                                             "tx2_carlanet",    "px2_carlanet"};

inline const char* const kAllProfiles[] = {"tx2_densenet169", "px2_densenet169", "tx2_resnet34",
                                           "px2_resnet34",    "tx2_resnet50",    "px2_resnet50",
                                           "tx2_carlanet",    "px2_carlanet",    "densenet_split_scan",
                                           "px2_multicam_720p"};

// Measured-latency toy model; output sizes are per stage.
inline edgesplit::ModelProfile toy_model(std::initializer_list<std::uint64_t> outputs, std::size_t bottleneck) {
  edgesplit::ModelProfile m;
  m.name = "toy";
  m.model_id = 7;
  std::size_t i = 0;
  for (auto o : outputs) {
    edgesplit::SubTaskCost s;
    s.name = "s" + std::to_string(++i);
    s.measured_edge_latency_s = 0.001 * static_cast<double>(i);
    s.measured_cloud_latency_s = 0.0001 * static_cast<double>(i);
    s.measured_edge_energy_j = 0.01 * static_cast<double>(i);
    s.output_bytes = o;
    m.subtasks.push_back(s);
  }
  m.bottleneck_index = bottleneck;
  m.result_bytes = 12;
  m.element_count_at_bottleneck = m.subtasks[bottleneck - 1].output_bytes / 4;
  m.bottleneck_shape = {1, 1, static_cast<std::uint16_t>(m.element_count_at_bottleneck)};
  return m;
}

}  // namespace testing_support
