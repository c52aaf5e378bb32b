#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsnn/common.hpp"

namespace dsnn {

// Binary tensor container matching the on-disk format:
//   magic "RFT1" | ndim u32 LE | dims u32 LE each | row-major f32 LE payload
struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
};

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

struct Dataset {
  int n = 0;
  int t_steps = 0;
  int channels = 0;
  int n_classes = 0;
  std::vector<float> features;  // [n * t_steps * channels]
  std::vector<int> labels;      // [n]
  std::string provenance;

  const float* sample(int idx) const {
    return features.data() + std::size_t(idx) * t_steps * channels;
  }
};

// features: 3-D tensor [N, T, C]; labels: 1-D whole-valued float tensor [N].
Dataset load_dataset(const std::string& features_path,
                     const std::string& labels_path);

void save_dataset(const std::string& features_path,
                  const std::string& labels_path, const Dataset& ds);

// Desk-scale spatio-temporal classification task. Every class is a fixed
// template of unit pulses; all classes share one multiset of channels (when
// the channel count allows distinct picks) so that collapsing time destroys
// the class information. Samples jitter the pulse times and add Gaussian
// background noise.
struct SyntheticSpec {
  int n_classes = 4;
  int pulses_per_class = 8;
  int channels = 16;
  int t_steps = 40;
  double jitter = 1.0;
  double noise_std = 0.05;
  int samples_per_class = 150;
  std::uint64_t seed = 7;

  void validate() const;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace dsnn
