#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dsnn/common.hpp"

namespace dsnn {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// Per-channel batch normalization over the batch and time axes of a
// [batch, t_steps, channels] block. Running stats are updated in training
// mode and used verbatim in eval mode.
template <class S>
struct BnState {
  int channels = 0;
  std::vector<S> gamma, beta, run_mean, run_var;

  static BnState init(int c) {
    BnState st;
    st.channels = c;
    st.gamma.assign(c, S(1));
    st.beta.assign(c, S(0));
    st.run_mean.assign(c, S(0));
    st.run_var.assign(c, S(1));
    return st;
  }
};

template <class S>
struct BnCache {
  std::vector<S> xhat;  // normalized pre-affine values, [batch * t * c]
  long count = 0;
};

template <class S>
std::vector<S> bn_forward(const std::vector<S>& x, int batch, int t_steps,
                          int channels, BnState<S>& st, bool training,
                          BnCache<S>* cache) {
  if (batch < 1) throw DimensionError("batchnorm: empty batch");
  if (channels != st.channels ||
      x.size() != std::size_t(batch) * t_steps * channels)
    throw DimensionError("batchnorm: input shape mismatch");

  const long count = long(batch) * t_steps;
  std::vector<S> mean(channels, S(0)), inv_std(channels, S(0));
  if (training) {
    std::vector<S> var(channels, S(0));
    for (std::size_t e = 0; e < x.size(); ++e) mean[e % channels] += x[e];
    for (int c = 0; c < channels; ++c) mean[c] /= S(count);
    for (std::size_t e = 0; e < x.size(); ++e) {
      const S dv = x[e] - mean[e % channels];
      var[e % channels] += dv * dv;
    }
    for (int c = 0; c < channels; ++c) {
      var[c] /= S(count);
      inv_std[c] = S(1) / std::sqrt(var[c] + S(kBnEps));
      st.run_mean[c] =
          S(1.0 - kBnMomentum) * st.run_mean[c] + S(kBnMomentum) * mean[c];
      st.run_var[c] =
          S(1.0 - kBnMomentum) * st.run_var[c] + S(kBnMomentum) * var[c];
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      mean[c] = st.run_mean[c];
      inv_std[c] = S(1) / std::sqrt(st.run_var[c] + S(kBnEps));
    }
  }

  std::vector<S> y(x.size());
  if (cache) {
    cache->xhat.resize(x.size());
    cache->count = count;
  }
  for (std::size_t e = 0; e < x.size(); ++e) {
    const int c = int(e % channels);
    const S xh = (x[e] - mean[c]) * inv_std[c];
    if (cache) cache->xhat[e] = xh;
    y[e] = st.gamma[c] * xh + st.beta[c];
  }
  return y;
}

// Affine gradients only; this normalization sits on the raw input features,
// so no gradient flows further upstream.
template <class S>
void bn_param_grads(const std::vector<S>& y_bar, const BnCache<S>& cache,
                    int channels, std::vector<S>& d_gamma,
                    std::vector<S>& d_beta) {
  if (y_bar.size() != cache.xhat.size())
    throw DimensionError("bn_param_grads: shape mismatch");
  d_gamma.assign(channels, S(0));
  d_beta.assign(channels, S(0));
  for (std::size_t e = 0; e < y_bar.size(); ++e) {
    const int c = int(e % channels);
    d_gamma[c] += y_bar[e] * cache.xhat[e];
    d_beta[c] += y_bar[e];
  }
}

// Inverted dropout: zero with probability p, survivors scaled by 1/(1-p).
// The mask is emitted so the backward pass can reuse it exactly.
template <class S>
std::vector<S> dropout_forward(const std::vector<S>& x, double p,
                               bool training, std::mt19937_64& rng,
                               std::vector<std::uint8_t>* mask_out) {
  if (!(p >= 0.0 && p < 1.0))
    throw ConfigError("dropout: p must be in [0, 1)");
  if (mask_out) mask_out->assign(x.size(), 1);
  if (!training || p == 0.0) return x;
  std::vector<S> y(x.size());
  const S scale = S(1.0 / (1.0 - p));
  for (std::size_t e = 0; e < x.size(); ++e) {
    if (uniform01(rng) < p) {
      y[e] = S(0);
      if (mask_out) (*mask_out)[e] = 0;
    } else {
      y[e] = x[e] * scale;
    }
  }
  return y;
}

template <class S>
std::vector<S> dropout_backward(const std::vector<S>& y_bar,
                                const std::vector<std::uint8_t>& mask,
                                double p) {
  if (y_bar.size() != mask.size())
    throw DimensionError("dropout_backward: shape mismatch");
  std::vector<S> x_bar(y_bar.size());
  const S scale = S(1.0 / (1.0 - p));
  for (std::size_t e = 0; e < y_bar.size(); ++e)
    x_bar[e] = mask[e] ? y_bar[e] * scale : S(0);
  return x_bar;
}

}  // namespace dsnn
