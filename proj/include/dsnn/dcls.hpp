#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dsnn/common.hpp"

namespace dsnn {

// Delay state for one all-to-all connection block. Delays are continuous
// during training and projected back onto [0, t_d_max] after every update.
template <class S>
struct DelayParams {
  int n_pre = 0;
  int n_post = 0;
  std::vector<S> d;  // [n_post * n_pre], row-major (post, pre)
  int t_d_max = 25;
  double sigma = 12.5;

  void validate() const {
    if (n_pre <= 0 || n_post <= 0 || d.size() != std::size_t(n_post) * n_pre)
      throw DimensionError("delay params: shape mismatch");
    if (!(sigma > 0.0)) throw ConfigError("delay params: sigma must be > 0");
    if (t_d_max < 1) throw ConfigError("delay params: t_d_max must be >= 1");
    for (S v : d)
      if (double(v) < 0.0 || double(v) > double(t_d_max))
        throw ConfigError("delay params: delay out of [0, t_d_max]");
  }
};

// Per-synapse Gaussian delay kernels materialized for one snapshot of
// (weights, delays, sigma). Each synapse (post i, pre j) carries a
// tap vector over n = 0..t_d:
//
//   k[i][j][n] = w_ij / c_ij * exp(-((n - t_d + d_ij + 1) / sigma)^2 / 2)
//   c_ij       = sum_n exp(-((n - t_d + d_ij + 1) / sigma)^2 / 2)
//
// so the taps of every synapse sum to its effective weight. Tap n = t_d
// aligns with the current timestep in the convolution, which places the
// bump's peak (n = t_d - d - 1) at an effective lag of d + 1 steps.
//
// Storage is lag-major: entry (j, m, i) holds k[i][j][t_d - m], the
// coefficient applied to presynaptic activity m steps in the past. This
// keeps the convolution inner loops contiguous over postsynaptic neurons.
template <class S>
struct DelayKernelBank {
  int n_pre = 0;
  int n_post = 0;
  int t_d = 0;
  std::vector<S> k;        // [n_pre * (t_d+1) * n_post]
  int off_grid_peaks = 0;  // active synapses whose bump centre lies below tap 0

  std::size_t lag_index(int j, int m, int i) const {
    return (std::size_t(j) * (t_d + 1) + m) * n_post + i;
  }
  // Kernel value in (post, pre, tap) convention.
  S at(int i, int j, int n) const { return k[lag_index(j, t_d - n, i)]; }
};

template <class S>
DelayKernelBank<S> build_kernels(const S* w, const S* d, int n_pre, int n_post,
                                 int t_d, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("build_kernels: sigma must be > 0");
  DelayKernelBank<S> bank;
  bank.n_pre = n_pre;
  bank.n_post = n_post;
  bank.t_d = t_d;
  bank.k.assign(std::size_t(n_pre) * (t_d + 1) * n_post, S(0));

  const S inv_sigma = S(1) / S(sigma);
  std::vector<S> g(std::size_t(t_d) + 1);
  for (int i = 0; i < n_post; ++i) {
    for (int j = 0; j < n_pre; ++j) {
      const S wij = w[std::size_t(i) * n_pre + j];
      if (wij == S(0)) continue;  // dormant synapse: all-zero taps
      const S dij = d[std::size_t(i) * n_pre + j];
      S c = S(0);
      for (int n = 0; n <= t_d; ++n) {
        const S a = (S(n) - S(t_d) + dij + S(1)) * inv_sigma;
        g[n] = std::exp(S(-0.5) * a * a);
        c += g[n];
      }
      if (!(c > S(0)) || !std::isfinite(double(c)))
        throw KernelDegenerateError(
            "kernel normalization underflow at synapse (post=" +
            std::to_string(i) + ", pre=" + std::to_string(j) + ")");
      if (double(dij) > double(t_d) - 1.0) ++bank.off_grid_peaks;
      const S scale = wij / c;
      for (int n = 0; n <= t_d; ++n)
        bank.k[bank.lag_index(j, t_d - n, i)] = scale * g[n];
    }
  }
  return bank;
}

template <class S>
DelayKernelBank<S> build_kernels(const std::vector<S>& w,
                                 const DelayParams<S>& dp) {
  dp.validate();
  if (w.size() != std::size_t(dp.n_post) * dp.n_pre)
    throw DimensionError("build_kernels: weight shape mismatch");
  for (S v : w)
    if (!std::isfinite(double(v)))
      throw NumericError("build_kernels: non-finite weight");
  return build_kernels(w.data(), dp.d.data(), dp.n_pre, dp.n_post, dp.t_d_max,
                       dp.sigma);
}

// Causal convolution of presynaptic activity into postsynaptic current:
//   I[t][i] = sum_j sum_{m=0}^{t_d} k[i][j][t_d - m] * x[t - m][j]
// with x[t < 0] = 0. Binary spike trains are the common case but any real
// activity sequence is accepted (the input layer feeds normalized features).
template <class S>
std::vector<S> synaptic_current(const std::vector<S>& x, int t_steps,
                                const DelayKernelBank<S>& bank) {
  if (x.size() != std::size_t(t_steps) * bank.n_pre)
    throw DimensionError("synaptic_current: input shape mismatch");
  std::vector<S> out(std::size_t(t_steps) * bank.n_post, S(0));
  for (int t = 0; t < t_steps; ++t) {
    for (int j = 0; j < bank.n_pre; ++j) {
      const S xv = x[std::size_t(t) * bank.n_pre + j];
      if (xv == S(0)) continue;
      const int m_max = std::min(bank.t_d, t_steps - 1 - t);
      for (int m = 0; m <= m_max; ++m) {
        S* dst = &out[std::size_t(t + m) * bank.n_post];
        const S* kk = &bank.k[bank.lag_index(j, m, 0)];
        for (int i = 0; i < bank.n_post; ++i) dst[i] += kk[i] * xv;
      }
    }
  }
  return out;
}

// Adjoint of synaptic_current with respect to the kernel taps, accumulated
// into a lag-major buffer of the same layout as DelayKernelBank::k.
template <class S>
void conv_kernel_grad(const std::vector<S>& x, const std::vector<S>& i_bar,
                      int t_steps, int n_pre, int n_post, int t_d,
                      std::vector<S>& k_bar) {
  if (k_bar.size() != std::size_t(n_pre) * (t_d + 1) * n_post)
    throw DimensionError("conv_kernel_grad: accumulator shape mismatch");
  for (int t = 0; t < t_steps; ++t) {
    for (int j = 0; j < n_pre; ++j) {
      const S xv = x[std::size_t(t) * n_pre + j];
      if (xv == S(0)) continue;
      const int m_max = std::min(t_d, t_steps - 1 - t);
      for (int m = 0; m <= m_max; ++m) {
        S* kb = &k_bar[(std::size_t(j) * (t_d + 1) + m) * n_post];
        const S* ib = &i_bar[std::size_t(t + m) * n_post];
        for (int i = 0; i < n_post; ++i) kb[i] += xv * ib[i];
      }
    }
  }
}

// Adjoint of synaptic_current with respect to the presynaptic activity.
template <class S>
std::vector<S> conv_input_grad(const std::vector<S>& i_bar, int t_steps,
                               const DelayKernelBank<S>& bank) {
  std::vector<S> x_bar(std::size_t(t_steps) * bank.n_pre, S(0));
  for (int t = 0; t < t_steps; ++t) {
    for (int j = 0; j < bank.n_pre; ++j) {
      S acc = S(0);
      const int m_max = std::min(bank.t_d, t_steps - 1 - t);
      for (int m = 0; m <= m_max; ++m) {
        const S* kk = &bank.k[bank.lag_index(j, m, 0)];
        const S* ib = &i_bar[std::size_t(t + m) * bank.n_post];
        for (int i = 0; i < bank.n_post; ++i) acc += kk[i] * ib[i];
      }
      x_bar[std::size_t(t) * bank.n_pre + j] = acc;
    }
  }
  return x_bar;
}

// Closed-form pull-back of tap gradients onto (w, d). With
// a_n = (n - t_d + d + 1)/sigma, G_n = exp(-a_n^2/2), C = sum G_n:
//
//   dL/dw = sum_n kbar_n * G_n / C
//   dL/dd = w * sum_n kbar_n * (G'_n * C - G_n * C') / C^2,
//           G'_n = -G_n * a_n / sigma
//
// The normalization C depends on d, hence the quotient-rule term.
// dL/dw is independent of w itself, so the same expression doubles as the
// straight-through candidate gradient of dormant synapses.
template <class S>
void kernel_param_grads(const std::vector<S>& k_bar, const S* w, const S* d,
                        int n_pre, int n_post, int t_d, double sigma,
                        std::vector<S>& dw, std::vector<S>& dd) {
  dw.assign(std::size_t(n_post) * n_pre, S(0));
  dd.assign(std::size_t(n_post) * n_pre, S(0));
  const S inv_sigma = S(1) / S(sigma);
  std::vector<S> g(std::size_t(t_d) + 1), gp(std::size_t(t_d) + 1);
  for (int i = 0; i < n_post; ++i) {
    for (int j = 0; j < n_pre; ++j) {
      const std::size_t e = std::size_t(i) * n_pre + j;
      const S dij = d[e];
      S c = S(0), cp = S(0);
      for (int n = 0; n <= t_d; ++n) {
        const S a = (S(n) - S(t_d) + dij + S(1)) * inv_sigma;
        g[n] = std::exp(S(-0.5) * a * a);
        gp[n] = -g[n] * a * inv_sigma;
        c += g[n];
        cp += gp[n];
      }
      if (!(c > S(0)) || !std::isfinite(double(c)))
        throw KernelDegenerateError(
            "kernel normalization underflow at synapse (post=" +
            std::to_string(i) + ", pre=" + std::to_string(j) + ")");
      S sum_a = S(0), sum_b = S(0);
      for (int n = 0; n <= t_d; ++n) {
        const S kb = k_bar[(std::size_t(j) * (t_d + 1) + (t_d - n)) * n_post + i];
        sum_a += kb * g[n];
        sum_b += kb * gp[n];
      }
      dw[e] = sum_a / c;
      dd[e] = w[e] * (sum_b * c - sum_a * cp) / (c * c);
    }
  }
}

// Kernel width schedule: linear from sigma_start at epoch 0 down to
// sigma_final at ceil(knee_frac * total_epochs), constant afterwards.
struct SigmaSchedule {
  double sigma_start = 12.5;
  double sigma_final = 0.5;
  double knee_frac = 0.75;
  int total_epochs = 1;

  void validate() const {
    if (!(sigma_final > 0.0))
      throw ConfigError("sigma schedule: sigma_final must be > 0");
    if (!(sigma_start >= sigma_final))
      throw ConfigError("sigma schedule: sigma_start must be >= sigma_final");
    if (!(knee_frac > 0.0 && knee_frac <= 1.0))
      throw ConfigError("sigma schedule: knee_frac must be in (0, 1]");
  }
};

inline double anneal_sigma(int epoch, const SigmaSchedule& sched) {
  sched.validate();
  if (epoch < 0) throw ConfigError("anneal_sigma: epoch must be >= 0");
  const int knee = int(std::ceil(sched.knee_frac * sched.total_epochs));
  if (epoch >= knee) return sched.sigma_final;
  return sched.sigma_start +
         (sched.sigma_final - sched.sigma_start) * double(epoch) / double(knee);
}

template <class S>
void clamp_delays(std::vector<S>& d, double t_d_max) {
  for (S& v : d) v = std::clamp(v, S(0), S(t_d_max));
}

template <class S>
void clamp_delays(DelayParams<S>& dp) {
  clamp_delays(dp.d, double(dp.t_d_max));
}

}  // namespace dsnn
