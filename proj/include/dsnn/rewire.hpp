#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dsnn/common.hpp"

namespace dsnn {

// Magnitude-parametrized sparse connectivity: w = sign * max(theta, 0).
// A connection with theta <= 0 is dormant and contributes nothing.

constexpr double kGrowEpsilon = 1e-6;  // theta assigned to freshly grown synapses

enum class SparsityMode { kDense, kFixed, kRandom, kRigl };

inline const char* to_string(SparsityMode m) {
  switch (m) {
    case SparsityMode::kDense: return "dense";
    case SparsityMode::kFixed: return "fixed";
    case SparsityMode::kRandom: return "random";
    case SparsityMode::kRigl: return "rigl";
  }
  return "?";
}

inline SparsityMode parse_sparsity_mode(const std::string& s) {
  if (s == "dense") return SparsityMode::kDense;
  if (s == "fixed") return SparsityMode::kFixed;
  if (s == "random") return SparsityMode::kRandom;
  if (s == "rigl") return SparsityMode::kRigl;
  throw ConfigError("unknown sparsity mode: " + s);
}

struct SparsityPlan {
  double p = 0.0;                            // requested global sparsity
  SparsityMode mode = SparsityMode::kDense;
  int cadence = 0;   // optimizer steps between rewiring events; 0 = per epoch
  bool rigl_flip_sign = false;  // grow most-negative candidate gradients instead

  bool operator==(const SparsityPlan&) const = default;

  void validate() const {
    if (!(p >= 0.0 && p < 1.0))
      throw ConfigError("sparsity plan: p must be in [0, 1)");
    if (cadence < 0) throw ConfigError("sparsity plan: cadence must be >= 0");
  }
};

// Erdos-Renyi layer adjustment: larger layers get proportionally fewer
// connections. Floored at 0 (small layers may come out fully connected).
inline double er_sparsity(double p, int n_pre, int n_post) {
  if (n_pre < 1 || n_post < 1)
    throw DimensionError("er_sparsity: layer sizes must be >= 1");
  if (!(p >= 0.0 && p < 1.0))
    throw ConfigError("er_sparsity: p must be in [0, 1)");
  const double adj =
      p * (1.0 - double(n_pre + n_post) / (double(n_pre) * double(n_post)));
  return std::max(0.0, adj);
}

inline std::int64_t er_target_active(double p, int n_pre, int n_post) {
  const double pl = er_sparsity(p, n_pre, n_post);
  return std::llround((1.0 - pl) * double(n_pre) * double(n_post));
}

// Fixed sign structure. Dale mode draws one fair coin per presynaptic neuron
// and broadcasts it down the column, so every outgoing weight of a neuron
// shares its sign; otherwise signs are i.i.d. fair coins per entry.
inline std::vector<std::int8_t> dale_signs(int n_pre, int n_post,
                                           std::mt19937_64& rng, bool dale) {
  std::vector<std::int8_t> sign(std::size_t(n_post) * n_pre);
  if (dale) {
    std::vector<std::int8_t> col(n_pre);
    for (int j = 0; j < n_pre; ++j) col[j] = (rng() & 1) ? 1 : -1;
    for (int i = 0; i < n_post; ++i)
      for (int j = 0; j < n_pre; ++j) sign[std::size_t(i) * n_pre + j] = col[j];
  } else {
    for (auto& s : sign) s = (rng() & 1) ? 1 : -1;
  }
  return sign;
}

template <class S>
struct SparseLayerState {
  int n_pre = 0;
  int n_post = 0;
  std::vector<S> theta;            // [post][pre]; w = sign * max(theta, 0)
  std::vector<std::int8_t> sign;   // +-1, immutable after init
  std::vector<std::uint8_t> mask;  // structural ceiling; all ones unless fixed
  std::vector<S> delay;            // [post][pre]
  std::int64_t target_active = 0;

  std::size_t size() const { return std::size_t(n_post) * n_pre; }

  std::int64_t count_active() const {
    std::int64_t c = 0;
    for (S v : theta) c += (v > S(0));
    return c;
  }

  std::vector<S> effective_weights() const {
    std::vector<S> w(size());
    for (std::size_t e = 0; e < w.size(); ++e)
      w[e] = theta[e] > S(0) ? S(sign[e]) * theta[e] : S(0);
    return w;
  }
};

// Number of presynaptic neurons whose nonzero outgoing weights mix signs.
template <class S>
int dale_violations(const SparseLayerState<S>& st) {
  int bad = 0;
  for (int j = 0; j < st.n_pre; ++j) {
    bool pos = false, neg = false;
    for (int i = 0; i < st.n_post; ++i) {
      const std::size_t e = std::size_t(i) * st.n_pre + j;
      if (st.theta[e] > S(0)) {
        if (st.sign[e] > 0) pos = true;
        else neg = true;
      }
    }
    bad += (pos && neg);
  }
  return bad;
}

// Top-k candidate gradients among dormant connections, largest signed value
// first (most negative first when flip_sign), ties broken by lowest flat
// index. Indices and values run parallel.
template <class S>
std::vector<std::int64_t> rigl_grow(std::span<const std::int64_t> dormant,
                                    std::span<const S> grads, std::int64_t k,
                                    bool flip_sign = false) {
  if (k < 0) throw ConfigError("rigl_grow: k must be >= 0");
  if (std::size_t(k) > dormant.size())
    throw GrowthExhaustedError("rigl_grow: k exceeds dormant pool");
  if (dormant.size() != grads.size())
    throw DimensionError("rigl_grow: index/gradient size mismatch");
  std::vector<std::size_t> order(dormant.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    const S va = flip_sign ? -grads[a] : grads[a];
    const S vb = flip_sign ? -grads[b] : grads[b];
    if (va != vb) return va > vb;
    return dormant[a] < dormant[b];
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), better);
  std::vector<std::int64_t> out(k);
  for (std::int64_t i = 0; i < k; ++i) out[i] = dormant[order[i]];
  return out;
}

// Uniform sample of k dormant connections without replacement.
inline std::vector<std::int64_t> random_grow(
    std::span<const std::int64_t> dormant, std::int64_t k,
    std::mt19937_64& rng) {
  if (k < 0) throw ConfigError("random_grow: k must be >= 0");
  if (std::size_t(k) > dormant.size())
    throw GrowthExhaustedError("random_grow: k exceeds dormant pool");
  std::vector<std::int64_t> pool(dormant.begin(), dormant.end());
  for (std::int64_t i = 0; i < k; ++i) {
    const std::size_t j =
        i + std::size_t(uniform01(rng) * double(pool.size() - i));
    std::swap(pool[i], pool[std::min(j, pool.size() - 1)]);
  }
  pool.resize(k);
  return pool;
}

template <class S>
struct RewireResult {
  std::vector<std::int64_t> grown;
  bool exhausted = false;
};

// Maintains the per-layer active budget. Dormancy is implicit (theta <= 0);
// this only grows: the deficit since the last event is filled from the
// dormant pool, either by top candidate gradient (rigl) or uniformly
// (random). Grown synapses restart at theta = kGrowEpsilon with a fresh
// uniform delay. Modes dense and fixed never rewire.
template <class S>
RewireResult<S> rewire_step(SparseLayerState<S>& st, const SparsityPlan& plan,
                            std::span<const S> cand_grads, double t_d_max,
                            std::mt19937_64& rng) {
  plan.validate();
  RewireResult<S> res;
  if (plan.mode == SparsityMode::kDense || plan.mode == SparsityMode::kFixed)
    return res;
  if (cand_grads.size() != st.size())
    throw DimensionError("rewire_step: candidate gradient shape mismatch");

  std::int64_t deficit = st.target_active - st.count_active();
  if (deficit <= 0) return res;

  std::vector<std::int64_t> dormant;
  dormant.reserve(st.size());
  for (std::size_t e = 0; e < st.size(); ++e)
    if (st.theta[e] <= S(0) && st.mask[e]) dormant.push_back(std::int64_t(e));

  if (deficit > std::int64_t(dormant.size())) {
    std::cerr << "warning: rewire deficit " << deficit
              << " exceeds dormant pool " << dormant.size()
              << "; activating entire pool\n";
    deficit = std::int64_t(dormant.size());
    res.exhausted = true;
  }

  if (plan.mode == SparsityMode::kRigl) {
    std::vector<S> vals(dormant.size());
    for (std::size_t q = 0; q < dormant.size(); ++q)
      vals[q] = cand_grads[std::size_t(dormant[q])];
    res.grown = rigl_grow<S>(dormant, vals, deficit, plan.rigl_flip_sign);
  } else {
    res.grown = random_grow(dormant, deficit, rng);
  }

  for (std::int64_t e : res.grown) {
    st.theta[std::size_t(e)] = S(kGrowEpsilon);
    st.delay[std::size_t(e)] = S(uniform01(rng) * t_d_max);
  }
  return res;
}

}  // namespace dsnn
