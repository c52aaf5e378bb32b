#include "dsnn/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace dsnn {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'T', '1'};
constexpr std::size_t kMaxElements = 1u << 30;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
  return std::uint32_t(std::uint8_t(buf[off])) |
         std::uint32_t(std::uint8_t(buf[off + 1])) << 8 |
         std::uint32_t(std::uint8_t(buf[off + 2])) << 16 |
         std::uint32_t(std::uint8_t(buf[off + 3])) << 24;
}

[[noreturn]] void format_error(const std::string& path, std::size_t offset,
                               const std::string& what) {
  throw FormatError(path + ": format error at byte " + std::to_string(offset) +
                    ": " + what);
}

}  // namespace

void save_tensor(const std::string& path, const Tensor& t) {
  if (t.shape.empty()) throw DimensionError("save_tensor: tensor has no dims");
  if (t.data.size() != t.numel())
    throw DimensionError("save_tensor: payload does not match dims");
  std::string buf;
  buf.reserve(8 + 4 * t.shape.size() + 4 * t.data.size());
  buf.append(kMagic, 4);
  put_u32(buf, std::uint32_t(t.shape.size()));
  for (auto d : t.shape) put_u32(buf, d);
  for (float v : t.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("save_tensor: cannot open " + path);
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw FormatError("save_tensor: write failed for " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_tensor: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    format_error(path, 0, "bad magic (expected RFT1)");
  if (buf.size() < 8) format_error(path, 4, "truncated header");
  const std::uint32_t ndim = get_u32(buf, 4);
  if (ndim == 0 || ndim > 8) format_error(path, 4, "unsupported ndim");
  if (buf.size() < 8 + 4ull * ndim)
    format_error(path, 8, "truncated dims block");

  Tensor t;
  t.shape.resize(ndim);
  std::size_t numel = 1;
  for (std::uint32_t k = 0; k < ndim; ++k) {
    t.shape[k] = get_u32(buf, 8 + 4ull * k);
    if (t.shape[k] == 0 || numel > kMaxElements / std::max(1u, t.shape[k]))
      format_error(path, 8 + 4ull * k, "dims overflow");
    numel *= t.shape[k];
  }
  const std::size_t payload_off = 8 + 4ull * ndim;
  const std::size_t want = 4 * numel;
  if (buf.size() - payload_off != want)
    format_error(path, payload_off,
                 "payload is " + std::to_string(buf.size() - payload_off) +
                     " bytes, needs " + std::to_string(want));
  t.data.resize(numel);
  for (std::size_t k = 0; k < numel; ++k) {
    const std::uint32_t bits = get_u32(buf, payload_off + 4 * k);
    std::memcpy(&t.data[k], &bits, 4);
  }
  return t;
}

Dataset load_dataset(const std::string& features_path,
                     const std::string& labels_path) {
  Tensor f = load_tensor(features_path);
  Tensor l = load_tensor(labels_path);
  if (f.shape.size() != 3)
    throw FormatError(features_path + ": features must be 3-D [N, T, C]");
  if (l.shape.size() != 1)
    throw FormatError(labels_path + ": labels must be 1-D");
  if (f.shape[0] != l.shape[0])
    throw DimensionError("dataset: N mismatch between features (" +
                         std::to_string(f.shape[0]) + ") and labels (" +
                         std::to_string(l.shape[0]) + ")");
  if (f.shape[0] == 0) throw DimensionError("dataset: empty");

  Dataset ds;
  ds.n = int(f.shape[0]);
  ds.t_steps = int(f.shape[1]);
  ds.channels = int(f.shape[2]);
  ds.features = std::move(f.data);
  ds.labels.resize(ds.n);
  int max_label = 0;
  for (int k = 0; k < ds.n; ++k) {
    const float v = l.data[k];
    if (!(v >= 0.0f) || v != std::floor(v))
      throw FormatError(labels_path + ": label " + std::to_string(k) +
                        " is not a whole non-negative number");
    ds.labels[k] = int(v);
    max_label = std::max(max_label, ds.labels[k]);
  }
  ds.n_classes = max_label + 1;
  ds.provenance = features_path;
  return ds;
}

void save_dataset(const std::string& features_path,
                  const std::string& labels_path, const Dataset& ds) {
  Tensor f;
  f.shape = {std::uint32_t(ds.n), std::uint32_t(ds.t_steps),
             std::uint32_t(ds.channels)};
  f.data = ds.features;
  save_tensor(features_path, f);
  Tensor l;
  l.shape = {std::uint32_t(ds.n)};
  l.data.resize(ds.n);
  for (int k = 0; k < ds.n; ++k) l.data[k] = float(ds.labels[k]);
  save_tensor(labels_path, l);
}

void SyntheticSpec::validate() const {
  if (t_steps < 1 || channels < 1)
    throw DimensionError("synthetic: grid too small to host a template");
  if (n_classes < 1 || pulses_per_class < 1 || samples_per_class < 1)
    throw ConfigError("synthetic: counts must be >= 1");
  if (jitter < 0.0 || noise_std < 0.0)
    throw ConfigError("synthetic: jitter and noise_std must be >= 0");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(splitmix64(spec.seed));

  // One channel multiset shared by all classes; distinct channels when the
  // grid is wide enough.
  std::vector<int> chans(spec.pulses_per_class);
  if (spec.channels >= spec.pulses_per_class) {
    std::vector<int> pool(spec.channels);
    for (int c = 0; c < spec.channels; ++c) pool[c] = c;
    for (int p = 0; p < spec.pulses_per_class; ++p) {
      const std::size_t j =
          p + std::size_t(uniform01(rng) * double(pool.size() - p));
      std::swap(pool[p], pool[std::min(j, pool.size() - 1)]);
      chans[p] = pool[p];
    }
  } else {
    for (int p = 0; p < spec.pulses_per_class; ++p)
      chans[p] = int(uniform01(rng) * spec.channels);
  }

  // Per-class pulse times: only timing separates the classes.
  std::vector<std::vector<int>> times(spec.n_classes);
  for (int k = 0; k < spec.n_classes; ++k) {
    times[k].resize(spec.pulses_per_class);
    for (int p = 0; p < spec.pulses_per_class; ++p)
      times[k][p] = int(uniform01(rng) * spec.t_steps);
  }

  Dataset ds;
  ds.n = spec.n_classes * spec.samples_per_class;
  ds.t_steps = spec.t_steps;
  ds.channels = spec.channels;
  ds.n_classes = spec.n_classes;
  ds.features.assign(std::size_t(ds.n) * spec.t_steps * spec.channels, 0.0f);
  ds.labels.resize(ds.n);
  ds.provenance = "synthetic seed=" + std::to_string(spec.seed);

  std::size_t base = 0;
  int idx = 0;
  for (int k = 0; k < spec.n_classes; ++k) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++idx) {
      ds.labels[idx] = k;
      float* feat = ds.features.data() + base;
      if (spec.noise_std > 0.0)
        for (int e = 0; e < spec.t_steps * spec.channels; ++e)
          feat[e] = float(spec.noise_std * normal01(rng));
      for (int p = 0; p < spec.pulses_per_class; ++p) {
        double t = times[k][p];
        if (spec.jitter > 0.0) t += spec.jitter * normal01(rng);
        const int ti = std::clamp(int(std::lround(t)), 0, spec.t_steps - 1);
        feat[std::size_t(ti) * spec.channels + chans[p]] += 1.0f;
      }
      base += std::size_t(spec.t_steps) * spec.channels;
    }
  }
  return ds;
}

}  // namespace dsnn
