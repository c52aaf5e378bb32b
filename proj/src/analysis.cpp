#include "dsnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

namespace dsnn {

namespace {

int delay_bin(float d, int t_d) {
  return int(std::clamp(round_half_even(double(d)), 0L, long(t_d)));
}

}  // namespace

RFGrid hidden_panel(const NetState<float>& net, int h) {
  const int t_d = net.cfg.t_d_max;
  if (h < 0 || h >= net.cfg.n_hidden)
    throw DimensionError("hidden_panel: index out of range");
  RFGrid g;
  g.channels = net.cfg.n_in;
  g.width = t_d + 1;
  g.v.assign(std::size_t(g.channels) * g.width, 0.0);
  for (int c = 0; c < g.channels; ++c) {
    const std::size_t e = std::size_t(h) * net.l1.n_pre + c;
    const float theta = net.l1.theta[e];
    if (theta <= 0.0f) continue;
    const double w = double(net.l1.sign[e]) * double(theta);
    g.at(c, delay_bin(net.l1.delay[e], t_d)) += w;
  }
  return g;
}

RFGrid output_rf(const NetState<float>& net, int o) {
  const int t_d = net.cfg.t_d_max;
  if (o < 0 || o >= net.cfg.n_out)
    throw DimensionError("output_rf: index out of range");
  RFGrid rf;
  rf.channels = net.cfg.n_in;
  rf.width = 2 * t_d + 1;
  rf.v.assign(std::size_t(rf.channels) * rf.width, 0.0);
  for (int h = 0; h < net.cfg.n_hidden; ++h) {
    const std::size_t e = std::size_t(o) * net.l2.n_pre + h;
    const float theta = net.l2.theta[e];
    if (theta <= 0.0f) continue;
    const double w_out = double(net.l2.sign[e]) * double(theta);
    const int shift = delay_bin(net.l2.delay[e], t_d);
    const RFGrid panel = hidden_panel(net, h);
    for (int c = 0; c < rf.channels; ++c)
      for (int t = 0; t <= t_d; ++t)
        rf.at(c, t + shift) += w_out * panel.at(c, t);
  }
  return rf;
}

MoranResult morans_i(const std::vector<double>& grid, int rows, int cols,
                     bool row_standardized) {
  const long n = long(rows) * cols;
  if (rows < 1 || cols < 1 || n < 2 ||
      grid.size() != std::size_t(rows) * cols)
    throw DimensionError("morans_i: grid must have at least 2 cells");

  const auto [mn, mx] = std::minmax_element(grid.begin(), grid.end());
  if (*mn == *mx)
    throw DegenerateFieldError("morans_i: zero-variance grid");

  double mean = 0.0;
  for (double x : grid) mean += x;
  mean /= double(n);
  double denom = 0.0;
  for (double x : grid) denom += (x - mean) * (x - mean);

  double num = 0.0, w_sum = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double xi = grid[std::size_t(r) * cols + c] - mean;
      double deg = 0.0;
      double nbr_sum = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          deg += 1.0;
          nbr_sum += grid[std::size_t(rr) * cols + cc] - mean;
        }
      }
      if (deg == 0.0) continue;
      const double w = row_standardized ? 1.0 / deg : 1.0;
      num += w * xi * nbr_sum;
      w_sum += w * deg;
    }
  }

  MoranResult res;
  res.n_cells = int(n);
  res.sum_weights = w_sum;
  res.i_value = (double(n) / w_sum) * num / denom;
  return res;
}

void render_rf(const RFGrid& grid, const std::string& path) {
  for (double v : grid.v)
    if (!std::isfinite(v)) throw NumericError("render_rf: non-finite grid");
  double max_abs = 0.0;
  for (double v : grid.v) max_abs = std::max(max_abs, std::fabs(v));

  std::string body;
  body.reserve(std::size_t(grid.channels) * grid.width * 3);
  for (int c = 0; c < grid.channels; ++c) {
    for (int x = 0; x < grid.width; ++x) {
      const double v = grid.at(c, x);
      const double alpha = max_abs > 0.0 ? std::fabs(v) / max_abs : 0.0;
      const unsigned char faded =
          (unsigned char)(std::lround((1.0 - alpha) * 255.0));
      if (v >= 0.0) {
        body.push_back(char(255));
        body.push_back(char(faded));
        body.push_back(char(faded));
      } else {
        body.push_back(char(faded));
        body.push_back(char(faded));
        body.push_back(char(255));
      }
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("render_rf: cannot write " + path);
  out << "P6\n" << grid.width << " " << grid.channels << "\n255\n";
  out.write(body.data(), std::streamsize(body.size()));
  if (!out) throw FormatError("render_rf: write failed for " + path);
}

NetworkAnalysis network_morans(const NetState<float>& net,
                               bool row_standardized) {
  NetworkAnalysis na;
  na.per_class.assign(net.cfg.n_out,
                      std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  for (int o = 0; o < net.cfg.n_out; ++o) {
    const RFGrid rf = output_rf(net, o);
    try {
      na.per_class[o] = morans_i(rf, row_standardized).i_value;
    } catch (const DegenerateFieldError&) {
      std::cerr << "warning: degenerate receptive field for class " << o
                << "; excluded from mean\n";
      continue;
    }
    sum += na.per_class[o];
    ++na.n_defined;
    if (na.argmax_class < 0 ||
        na.per_class[o] > na.per_class[na.argmax_class])
      na.argmax_class = o;
    if (na.argmin_class < 0 ||
        na.per_class[o] < na.per_class[na.argmin_class])
      na.argmin_class = o;
  }
  na.mean = na.n_defined > 0 ? sum / double(na.n_defined)
                             : std::numeric_limits<double>::quiet_NaN();
  return na;
}

NetworkAnalysis analyze_network(const NetState<float>& net,
                                const std::string& out_dir,
                                bool row_standardized) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  NetworkAnalysis na = network_morans(net, row_standardized);

  std::ofstream csv(out_dir + "/morans.csv", std::ios::trunc);
  if (!csv) throw FormatError("analyze_network: cannot write to " + out_dir);
  csv << "class,morans_i\n";
  char buf[64];
  for (int o = 0; o < net.cfg.n_out; ++o) {
    if (std::isnan(na.per_class[o])) {
      csv << o << ",undefined\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%.9g\n", o, na.per_class[o]);
      csv << buf;
    }
  }
  std::snprintf(buf, sizeof(buf), "mean,%.9g\n", na.mean);
  csv << buf;
  csv.close();
  if (!csv) throw FormatError("analyze_network: csv write failed");

  for (int o = 0; o < net.cfg.n_out; ++o)
    render_rf(output_rf(net, o),
              out_dir + "/rf_class_" + std::to_string(o) + ".ppm");
  return na;
}

}  // namespace dsnn
