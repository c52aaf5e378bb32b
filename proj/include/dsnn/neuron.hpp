#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dsnn/common.hpp"

namespace dsnn {

// Discrete leaky integrate-and-fire parameters. tau is expressed as a
// multiple of the simulation timestep, so the per-step decay factor is
// 1 - 1/tau.
struct LifParams {
  double tau = 10.05;
  double threshold = 1.0;
  double reset_value = 0.0;
  double surrogate_scale = 1.0;

  double decay() const { return 1.0 - 1.0 / tau; }

  bool operator==(const LifParams&) const = default;

  void validate() const {
    if (!(tau > 1.0)) throw ConfigError("lif: tau must be > 1");
    if (!(threshold > 0.0)) throw ConfigError("lif: threshold must be > 0");
    if (!(surrogate_scale > 0.0))
      throw ConfigError("lif: surrogate_scale must be > 0");
  }
};

// Forward trace of one layer over one sample. u holds the potential at the
// threshold evaluation point (before any reset); the stored post-reset value
// is u[t] * (1 - s[t]), i.e. exactly 0 on spiking steps.
template <class S>
struct LayerTrace {
  int t_steps = 0;
  int n = 0;
  std::vector<S> u;  // [t_steps * n]
  std::vector<S> s;  // [t_steps * n], entries 0 or 1
  std::vector<S> i;  // input currents, [t_steps * n]

  S u_at(int t, int j) const { return u[std::size_t(t) * n + j]; }
  S s_at(int t, int j) const { return s[std::size_t(t) * n + j]; }
  S u_post_at(int t, int j) const {
    return u_at(t, j) * (S(1) - s_at(t, j));
  }
};

// Backward-pass stand-in for the spike step derivative:
//   g(v) = 1 / (1 + (pi * scale * v)^2)
// Peaks at 1 for v = 0, even in v, strictly decreasing in |v|.
template <class S>
inline S surrogate_grad(S v, S scale) {
  const S a = S(M_PI) * scale * v;
  return S(1) / (S(1) + a * a);
}

// Euler-discretized membrane update:
//   u[t] = (1 - 1/tau) * u_post[t-1] + i[t-1],  u[-1] = 0, i[-1] = 0.
// Spiking mode: s[t] = 1 when u[t] >= threshold, and the stored potential is
// hard-reset to 0 within the same step. Non-spiking mode (readout) never
// fires and never resets.
template <class S>
LayerTrace<S> lif_forward(const std::vector<S>& i_seq, int t_steps, int n,
                          const LifParams& p, bool spiking) {
  p.validate();
  if (t_steps < 0 || n <= 0 || i_seq.size() != std::size_t(t_steps) * n)
    throw DimensionError("lif_forward: current sequence size mismatch");
  for (S v : i_seq)
    if (!std::isfinite(double(v)))
      throw NumericError("lif_forward: non-finite input current");

  LayerTrace<S> tr;
  tr.t_steps = t_steps;
  tr.n = n;
  tr.u.assign(std::size_t(t_steps) * n, S(0));
  tr.s.assign(std::size_t(t_steps) * n, S(0));
  tr.i = i_seq;

  const S lambda = S(p.decay());
  const S thr = S(p.threshold);
  std::vector<S> u_prev_post(n, S(0));
  for (int t = 0; t < t_steps; ++t) {
    for (int j = 0; j < n; ++j) {
      const S cur_prev = (t == 0) ? S(0) : i_seq[std::size_t(t - 1) * n + j];
      const S u = lambda * u_prev_post[j] + cur_prev;
      tr.u[std::size_t(t) * n + j] = u;
      if (spiking && u >= thr) {
        tr.s[std::size_t(t) * n + j] = S(1);
        u_prev_post[j] = S(p.reset_value);
      } else {
        u_prev_post[j] = u;
      }
    }
  }
  return tr;
}

}  // namespace dsnn
