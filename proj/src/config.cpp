#include "dsnn/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dsnn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": bad number '" + v + "'");
  }
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": bad integer '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": bad integer '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  throw ConfigError("config key " + key + ": bad flag '" + v + "' (use 0/1)");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&,
                                  const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_in", [](RunConfig& c, auto& k, auto& v) { c.net.n_in = int(parse_long(k, v)); }},
      {"n_hidden", [](RunConfig& c, auto& k, auto& v) { c.net.n_hidden = int(parse_long(k, v)); }},
      {"n_out", [](RunConfig& c, auto& k, auto& v) { c.net.n_out = int(parse_long(k, v)); }},
      {"t_steps", [](RunConfig& c, auto& k, auto& v) { c.net.t_steps = int(parse_long(k, v)); }},
      {"tau", [](RunConfig& c, auto& k, auto& v) { c.net.lif.tau = parse_double(k, v); }},
      {"threshold", [](RunConfig& c, auto& k, auto& v) { c.net.lif.threshold = parse_double(k, v); }},
      {"surrogate_scale", [](RunConfig& c, auto& k, auto& v) { c.net.lif.surrogate_scale = parse_double(k, v); }},
      {"t_d_max", [](RunConfig& c, auto& k, auto& v) { c.net.t_d_max = int(parse_long(k, v)); }},
      {"sigma_start", [](RunConfig& c, auto& k, auto& v) { c.net.sigma_start = parse_double(k, v); }},
      {"sigma_final", [](RunConfig& c, auto& k, auto& v) { c.net.sigma_final = parse_double(k, v); }},
      {"sigma_knee_frac", [](RunConfig& c, auto& k, auto& v) { c.net.sigma_knee_frac = parse_double(k, v); }},
      {"dropout_p", [](RunConfig& c, auto& k, auto& v) { c.net.dropout_p = parse_double(k, v); }},
      {"l1_strength", [](RunConfig& c, auto& k, auto& v) { c.net.l1_strength = parse_double(k, v); }},
      {"readout", [](RunConfig& c, auto&, auto& v) { c.net.readout = parse_readout_mode(v); }},
      {"dale", [](RunConfig& c, auto& k, auto& v) { c.net.dale = parse_bool(k, v); }},
      {"learn_delays", [](RunConfig& c, auto& k, auto& v) { c.net.learn_delays = parse_bool(k, v); }},
      {"sparsity_p", [](RunConfig& c, auto& k, auto& v) { c.net.sparsity.p = parse_double(k, v); }},
      {"sparsity_mode", [](RunConfig& c, auto&, auto& v) { c.net.sparsity.mode = parse_sparsity_mode(v); }},
      {"rewire_cadence", [](RunConfig& c, auto& k, auto& v) { c.net.sparsity.cadence = int(parse_long(k, v)); }},
      {"rigl_flip_sign", [](RunConfig& c, auto& k, auto& v) { c.net.sparsity.rigl_flip_sign = parse_bool(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.net.seed = parse_u64(k, v); }},
      {"epochs", [](RunConfig& c, auto& k, auto& v) { c.plan.epochs = int(parse_long(k, v)); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.plan.batch_size = int(parse_long(k, v)); }},
      {"lr_w_peak", [](RunConfig& c, auto& k, auto& v) { c.plan.lr_w_peak = parse_double(k, v); }},
      {"lr_w_warmup_frac", [](RunConfig& c, auto& k, auto& v) { c.plan.lr_w_warmup_frac = parse_double(k, v); }},
      {"lr_d_initial", [](RunConfig& c, auto& k, auto& v) { c.plan.lr_d_initial = parse_double(k, v); }},
      {"test_fraction", [](RunConfig& c, auto& k, auto& v) { c.plan.test_fraction = parse_double(k, v); }},
      {"round_delays", [](RunConfig& c, auto& k, auto& v) { c.round_delays = parse_bool(k, v); }},
      {"morans_row_standardized", [](RunConfig& c, auto& k, auto& v) { c.morans_row_standardized = parse_bool(k, v); }},
  };
  return table;
}

void parse_lines(const std::string& text,
                 const std::function<void(const std::string&,
                                          const std::string&)>& on_kv) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line is not key=value: '" + t + "'");
    on_kv(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  parse_lines(text, [&](const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end())
      throw ConfigError("unknown config key: " + key);
    it->second(cfg, key, value);
  });
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config_text(read_file(path));
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "n_in=" << c.net.n_in << "\n";
  out << "n_hidden=" << c.net.n_hidden << "\n";
  out << "n_out=" << c.net.n_out << "\n";
  out << "t_steps=" << c.net.t_steps << "\n";
  out << "tau=" << fmt_double(c.net.lif.tau) << "\n";
  out << "threshold=" << fmt_double(c.net.lif.threshold) << "\n";
  out << "surrogate_scale=" << fmt_double(c.net.lif.surrogate_scale) << "\n";
  out << "t_d_max=" << c.net.t_d_max << "\n";
  out << "sigma_start=" << fmt_double(c.net.sigma_start) << "\n";
  out << "sigma_final=" << fmt_double(c.net.sigma_final) << "\n";
  out << "sigma_knee_frac=" << fmt_double(c.net.sigma_knee_frac) << "\n";
  out << "dropout_p=" << fmt_double(c.net.dropout_p) << "\n";
  out << "l1_strength=" << fmt_double(c.net.l1_strength) << "\n";
  out << "readout=" << to_string(c.net.readout) << "\n";
  out << "dale=" << (c.net.dale ? 1 : 0) << "\n";
  out << "learn_delays=" << (c.net.learn_delays ? 1 : 0) << "\n";
  out << "sparsity_p=" << fmt_double(c.net.sparsity.p) << "\n";
  out << "sparsity_mode=" << to_string(c.net.sparsity.mode) << "\n";
  out << "rewire_cadence=" << c.net.sparsity.cadence << "\n";
  out << "rigl_flip_sign=" << (c.net.sparsity.rigl_flip_sign ? 1 : 0) << "\n";
  out << "seed=" << c.net.seed << "\n";
  out << "epochs=" << c.plan.epochs << "\n";
  out << "batch_size=" << c.plan.batch_size << "\n";
  out << "lr_w_peak=" << fmt_double(c.plan.lr_w_peak) << "\n";
  out << "lr_w_warmup_frac=" << fmt_double(c.plan.lr_w_warmup_frac) << "\n";
  out << "lr_d_initial=" << fmt_double(c.plan.lr_d_initial) << "\n";
  out << "test_fraction=" << fmt_double(c.plan.test_fraction) << "\n";
  out << "round_delays=" << (c.round_delays ? 1 : 0) << "\n";
  out << "morans_row_standardized=" << (c.morans_row_standardized ? 1 : 0)
      << "\n";
  return out.str();
}

SyntheticSpec parse_synthetic_text(const std::string& text) {
  SyntheticSpec spec;
  parse_lines(text, [&](const std::string& key, const std::string& value) {
    if (key == "n_classes") spec.n_classes = int(parse_long(key, value));
    else if (key == "pulses_per_class") spec.pulses_per_class = int(parse_long(key, value));
    else if (key == "channels") spec.channels = int(parse_long(key, value));
    else if (key == "t_steps") spec.t_steps = int(parse_long(key, value));
    else if (key == "jitter") spec.jitter = parse_double(key, value);
    else if (key == "noise_std") spec.noise_std = parse_double(key, value);
    else if (key == "samples_per_class") spec.samples_per_class = int(parse_long(key, value));
    else if (key == "seed") spec.seed = parse_u64(key, value);
    else throw ConfigError("unknown synthetic spec key: " + key);
  });
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  return parse_synthetic_text(read_file(path));
}

std::string serialize_synthetic_spec(const SyntheticSpec& s) {
  std::ostringstream out;
  out << "n_classes=" << s.n_classes << "\n";
  out << "pulses_per_class=" << s.pulses_per_class << "\n";
  out << "channels=" << s.channels << "\n";
  out << "t_steps=" << s.t_steps << "\n";
  out << "jitter=" << fmt_double(s.jitter) << "\n";
  out << "noise_std=" << fmt_double(s.noise_std) << "\n";
  out << "samples_per_class=" << s.samples_per_class << "\n";
  out << "seed=" << s.seed << "\n";
  return out.str();
}

}  // namespace dsnn
