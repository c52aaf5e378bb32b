#pragma once

#include <string>

#include "dsnn/dataio.hpp"
#include "dsnn/trainer.hpp"

namespace dsnn {

// Flat key=value run configuration. Unknown keys are rejected; parse and
// serialize are mutual inverses.
struct RunConfig {
  NetConfig net;
  TrainPlan plan;
  bool round_delays = false;
  bool morans_row_standardized = false;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

SyntheticSpec parse_synthetic_text(const std::string& text);
SyntheticSpec load_synthetic_spec(const std::string& path);
std::string serialize_synthetic_spec(const SyntheticSpec& spec);

}  // namespace dsnn
