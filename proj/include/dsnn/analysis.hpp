#pragma once

#include <string>
#include <vector>

#include "dsnn/trainer.hpp"

namespace dsnn {

// Signed grid over (input channel, delay bin). Hidden panels span delay bins
// 0..t_d; output receptive fields are widened to 2*t_d + 1 so shifting by the
// hidden-to-output delay never clips.
struct RFGrid {
  int channels = 0;
  int width = 0;
  std::vector<double> v;  // [channels * width]

  double at(int c, int x) const { return v[std::size_t(c) * width + x]; }
  double& at(int c, int x) { return v[std::size_t(c) * width + x]; }
};

struct MoranResult {
  double i_value = 0.0;
  int n_cells = 0;
  double sum_weights = 0.0;
};

// Weight map of one hidden neuron over (input channel, rounded delay):
// each active input synapse drops its effective weight at its delay bin.
RFGrid hidden_panel(const NetState<float>& net, int h);

// Receptive field of one output neuron: hidden panels scaled by the
// hidden-to-output weight and shifted by the rounded hidden-to-output delay.
RFGrid output_rf(const NetState<float>& net, int o);

// Global spatial autocorrelation with binary queen's-case weights
// (8-neighborhood; edge and corner cells have 5 and 3 neighbors). Throws
// DegenerateFieldError on zero-variance grids.
MoranResult morans_i(const std::vector<double>& grid, int rows, int cols,
                     bool row_standardized = false);

inline MoranResult morans_i(const RFGrid& g, bool row_standardized = false) {
  return morans_i(g.v, g.channels, g.width, row_standardized);
}

// Binary PPM (P6) heatmap: red over white for positive cells, blue over
// white for negative, alpha proportional to |value| / max|value|.
void render_rf(const RFGrid& grid, const std::string& path);

struct NetworkAnalysis {
  std::vector<double> per_class;  // NaN where the field is degenerate
  double mean = 0.0;
  int n_defined = 0;
  int argmax_class = -1;
  int argmin_class = -1;
};

NetworkAnalysis network_morans(const NetState<float>& net,
                               bool row_standardized = false);

// Writes rf_class_<k>.ppm per output class plus morans.csv
// (class,morans_i rows and a mean row) under out_dir.
NetworkAnalysis analyze_network(const NetState<float>& net,
                                const std::string& out_dir,
                                bool row_standardized = false);

}  // namespace dsnn
