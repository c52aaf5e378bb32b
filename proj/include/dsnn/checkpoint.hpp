#pragma once

#include <string>
#include <vector>

#include "dsnn/config.hpp"
#include "dsnn/trainer.hpp"

namespace dsnn {

// Checkpoint directory layout: manifest.txt (config echo plus epoch and
// sigma) and one tensor file per parameter array.
void save_checkpoint(const std::string& dir, const NetState<float>& net,
                     const RunConfig& cfg);

struct Checkpoint {
  NetState<float> net;
  RunConfig cfg;
};

Checkpoint load_checkpoint(const std::string& dir);

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows);

}  // namespace dsnn
