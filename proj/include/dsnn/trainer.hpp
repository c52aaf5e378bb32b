#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dsnn/common.hpp"
#include "dsnn/dataio.hpp"
#include "dsnn/dcls.hpp"
#include "dsnn/neuron.hpp"
#include "dsnn/norm.hpp"
#include "dsnn/rewire.hpp"

namespace dsnn {

enum class ReadoutMode { kMean, kMax };

inline const char* to_string(ReadoutMode m) {
  return m == ReadoutMode::kMean ? "mean" : "max";
}
inline ReadoutMode parse_readout_mode(const std::string& s) {
  if (s == "mean") return ReadoutMode::kMean;
  if (s == "max") return ReadoutMode::kMax;
  throw ConfigError("unknown readout mode: " + s);
}

struct NetConfig {
  int n_in = 40;
  int n_hidden = 256;
  int n_out = 20;
  int t_steps = 80;
  double dropout_p = 0.4;
  double l1_strength = 0.1;
  LifParams lif;
  int t_d_max = 25;
  double sigma_start = 12.5;
  double sigma_final = 0.5;
  double sigma_knee_frac = 0.75;
  SparsityPlan sparsity;
  bool dale = false;
  ReadoutMode readout = ReadoutMode::kMean;
  bool learn_delays = true;
  std::uint64_t seed = 1234;

  bool operator==(const NetConfig&) const = default;

  void validate() const {
    if (n_in < 1 || n_hidden < 1 || n_out < 1 || t_steps < 1)
      throw ConfigError("net config: sizes must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
      throw ConfigError("net config: dropout_p must be in [0, 1)");
    if (l1_strength < 0.0)
      throw ConfigError("net config: l1_strength must be >= 0");
    if (t_d_max < 1) throw ConfigError("net config: t_d_max must be >= 1");
    lif.validate();
    sparsity.validate();
    SigmaSchedule probe{sigma_start, sigma_final, sigma_knee_frac, 1};
    probe.validate();
  }
};

struct TrainPlan {
  int epochs = 50;
  int batch_size = 64;
  double lr_w_peak = 5e-3;
  double lr_w_warmup_frac = 0.3;
  double lr_d_initial = 0.1;
  double test_fraction = 0.2;

  bool operator==(const TrainPlan&) const = default;

  void validate() const {
    if (epochs < 0) throw ConfigError("train plan: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train plan: batch_size must be >= 1");
    if (lr_w_peak < 0.0 || lr_d_initial < 0.0)
      throw ConfigError("train plan: learning rates must be >= 0");
    if (!(lr_w_warmup_frac >= 0.0 && lr_w_warmup_frac <= 1.0))
      throw ConfigError("train plan: lr_w_warmup_frac must be in [0, 1]");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
      throw ConfigError("train plan: test_fraction must be in [0, 1)");
  }
};

// rng stream tags
constexpr std::uint64_t kRngLayer1 = 0x100, kRngLayer2 = 0x200;
constexpr std::uint64_t kRngSignOff = 0, kRngMaskOff = 1, kRngThetaOff = 2,
                        kRngDelayOff = 3;
constexpr std::uint64_t kRngDropout = 0x300, kRngGrow = 0x301,
                        kRngSplit = 0x302, kRngShuffleBase = 0x1000;

template <class S>
struct NetState {
  NetConfig cfg;
  SparseLayerState<S> l1, l2;
  BnState<S> bn;
  double sigma = 12.5;
  int epochs_done = 0;
};

template <class S>
SparseLayerState<S> init_layer(int n_pre, int n_post, const SparsityPlan& plan,
                               bool dale, int t_d_max, std::uint64_t seed,
                               std::uint64_t tag_base) {
  SparseLayerState<S> st;
  st.n_pre = n_pre;
  st.n_post = n_post;
  const std::size_t size = std::size_t(n_post) * n_pre;
  st.target_active = plan.mode == SparsityMode::kDense
                         ? std::int64_t(size)
                         : er_target_active(plan.p, n_pre, n_post);

  auto sign_rng = make_rng(seed, tag_base + kRngSignOff);
  st.sign = dale_signs(n_pre, n_post, sign_rng, dale);

  // Initial active subset. When the budget covers the whole layer no rng is
  // consumed, which keeps dense and fixed-at-p=0 runs on identical streams.
  std::vector<std::uint8_t> active(size, 1);
  if (st.target_active < std::int64_t(size)) {
    active.assign(size, 0);
    std::vector<std::int64_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    auto mask_rng = make_rng(seed, tag_base + kRngMaskOff);
    for (std::int64_t i = 0; i < st.target_active; ++i) {
      const std::size_t j =
          i + std::size_t(uniform01(mask_rng) * double(size - i));
      std::swap(idx[i], idx[std::min(j, size - 1)]);
      active[std::size_t(idx[i])] = 1;
    }
  }
  st.mask = (plan.mode == SparsityMode::kFixed)
                ? active
                : std::vector<std::uint8_t>(size, 1);

  auto theta_rng = make_rng(seed, tag_base + kRngThetaOff);
  const double std_dev = std::sqrt(2.0 / double(n_pre));
  st.theta.resize(size);
  for (std::size_t e = 0; e < size; ++e) {
    const double draw = std::fabs(normal01(theta_rng) * std_dev);
    st.theta[e] = active[e] ? S(draw) : S(0);
  }

  auto delay_rng = make_rng(seed, tag_base + kRngDelayOff);
  st.delay.resize(size);
  for (std::size_t e = 0; e < size; ++e)
    st.delay[e] = S(uniform01(delay_rng) * double(t_d_max));
  return st;
}

template <class S>
NetState<S> init_net(const NetConfig& cfg) {
  cfg.validate();
  NetState<S> net;
  net.cfg = cfg;
  net.l1 = init_layer<S>(cfg.n_in, cfg.n_hidden, cfg.sparsity, cfg.dale,
                         cfg.t_d_max, cfg.seed, kRngLayer1);
  net.l2 = init_layer<S>(cfg.n_hidden, cfg.n_out, cfg.sparsity, cfg.dale,
                         cfg.t_d_max, cfg.seed, kRngLayer2);
  net.bn = BnState<S>::init(cfg.n_in);
  net.sigma = cfg.sigma_start;
  return net;
}

struct LrPair {
  double w = 0.0;
  double d = 0.0;
};

// Weights: linear warmup to the peak over the warmup fraction, then cosine
// decay to peak/1e4. Delays: plain cosine from the initial rate to 0.
inline LrPair schedule_lr(long step, long total_steps, const TrainPlan& plan) {
  if (step < 0 || step > total_steps)
    throw ConfigError("schedule_lr: step out of [0, total_steps]");
  if (total_steps == 0) return {plan.lr_w_peak, plan.lr_d_initial};
  LrPair lr;
  const double warm = plan.lr_w_warmup_frac * double(total_steps);
  if (double(step) <= warm && warm > 0.0) {
    lr.w = plan.lr_w_peak * double(step) / warm;
  } else {
    const double floor_w = plan.lr_w_peak * 1e-4;
    const double span = double(total_steps) - warm;
    const double x = span > 0.0 ? (double(step) - warm) / span : 1.0;
    lr.w = floor_w + (plan.lr_w_peak - floor_w) * 0.5 * (1.0 + std::cos(M_PI * x));
  }
  lr.d = plan.lr_d_initial * 0.5 *
         (1.0 + std::cos(M_PI * double(step) / double(total_steps)));
  return lr;
}

template <class S>
struct ForwardCache {
  bool training = false;
  int batch = 0;
  std::vector<S> xbn;                  // [B*T*C] normalized inputs
  BnCache<S> bn;
  DelayKernelBank<S> bank1, bank2;
  std::vector<S> u1, s1;               // hidden trace, [B*T*H]
  std::vector<std::uint8_t> drop_mask; // [B*T*H]
  std::vector<S> y1;                   // dropped spikes, [B*T*H]
  std::vector<S> u2;                   // readout potentials, [B*T*O]
  std::vector<int> readout_argmax;     // [B*O], max-readout only
  std::vector<S> logits;               // [B*O]
};

template <class S>
struct GradientSet {
  std::vector<S> theta1, theta2;  // masked to active entries, L1 included
  std::vector<S> delay1, delay2;
  std::vector<S> gamma, beta;
  std::vector<S> cand1, cand2;    // straight-through dL/dtheta, every entry
};

// batchnorm -> delayed currents -> spiking LIF -> dropout -> delayed
// currents -> non-spiking readout; logits reduce the readout potential over
// time (mean by default).
template <class S>
std::vector<S> forward_pass(const std::vector<S>& features, int batch,
                            NetState<S>& net, bool training,
                            std::mt19937_64& dropout_rng,
                            ForwardCache<S>* cache) {
  const NetConfig& cfg = net.cfg;
  const int T = cfg.t_steps, C = cfg.n_in, H = cfg.n_hidden, O = cfg.n_out;
  if (features.size() != std::size_t(batch) * T * C)
    throw DimensionError("forward_pass: feature shape mismatch");

  BnCache<S> bn_cache;
  std::vector<S> xbn = bn_forward(features, batch, T, C, net.bn, training,
                                  cache ? &bn_cache : nullptr);

  const std::vector<S> w1 = net.l1.effective_weights();
  const std::vector<S> w2 = net.l2.effective_weights();
  DelayKernelBank<S> bank1 = build_kernels(w1.data(), net.l1.delay.data(), C,
                                           H, cfg.t_d_max, net.sigma);
  DelayKernelBank<S> bank2 = build_kernels(w2.data(), net.l2.delay.data(), H,
                                           O, cfg.t_d_max, net.sigma);

  std::vector<S> logits(std::size_t(batch) * O, S(0));
  if (cache) {
    cache->training = training;
    cache->batch = batch;
    cache->bn = std::move(bn_cache);
    cache->u1.resize(std::size_t(batch) * T * H);
    cache->s1.resize(std::size_t(batch) * T * H);
    cache->drop_mask.resize(std::size_t(batch) * T * H);
    cache->y1.resize(std::size_t(batch) * T * H);
    cache->u2.resize(std::size_t(batch) * T * O);
    if (cfg.readout == ReadoutMode::kMax)
      cache->readout_argmax.assign(std::size_t(batch) * O, 0);
  }

  std::vector<S> xb(std::size_t(T) * C);
  std::vector<std::uint8_t> mask;
  for (int b = 0; b < batch; ++b) {
    const std::size_t in_off = std::size_t(b) * T * C;
    xb.assign(xbn.begin() + in_off, xbn.begin() + in_off + std::size_t(T) * C);

    std::vector<S> cur1 = synaptic_current(xb, T, bank1);
    LayerTrace<S> tr1 = lif_forward(cur1, T, H, cfg.lif, true);
    std::vector<S> y1 =
        dropout_forward(tr1.s, cfg.dropout_p, training, dropout_rng, &mask);
    std::vector<S> cur2 = synaptic_current(y1, T, bank2);
    LayerTrace<S> tr2 = lif_forward(cur2, T, O, cfg.lif, false);

    for (int o = 0; o < O; ++o) {
      if (cfg.readout == ReadoutMode::kMean) {
        S acc = S(0);
        for (int t = 0; t < T; ++t) acc += tr2.u[std::size_t(t) * O + o];
        logits[std::size_t(b) * O + o] = acc / S(T);
      } else {
        int best_t = 0;
        S best = tr2.u[o];
        for (int t = 1; t < T; ++t) {
          const S v = tr2.u[std::size_t(t) * O + o];
          if (v > best) {
            best = v;
            best_t = t;
          }
        }
        logits[std::size_t(b) * O + o] = best;
        if (cache) cache->readout_argmax[std::size_t(b) * O + o] = best_t;
      }
    }

    if (cache) {
      const std::size_t h_off = std::size_t(b) * T * H;
      std::copy(tr1.u.begin(), tr1.u.end(), cache->u1.begin() + h_off);
      std::copy(tr1.s.begin(), tr1.s.end(), cache->s1.begin() + h_off);
      std::copy(mask.begin(), mask.end(), cache->drop_mask.begin() + h_off);
      std::copy(y1.begin(), y1.end(), cache->y1.begin() + h_off);
      std::copy(tr2.u.begin(), tr2.u.end(),
                cache->u2.begin() + std::size_t(b) * T * O);
    }
  }

  if (cache) {
    cache->xbn = std::move(xbn);
    cache->bank1 = std::move(bank1);
    cache->bank2 = std::move(bank2);
    cache->logits = logits;
  }
  return logits;
}

template <class S>
void softmax_row(const S* logits, int n, std::vector<double>& probs) {
  probs.resize(n);
  double m = -std::numeric_limits<double>::infinity();
  for (int o = 0; o < n; ++o) m = std::max(m, double(logits[o]));
  double z = 0.0;
  for (int o = 0; o < n; ++o) {
    probs[o] = std::exp(double(logits[o]) - m);
    z += probs[o];
  }
  for (int o = 0; o < n; ++o) probs[o] /= z;
}

// Mean softmax cross-entropy plus L1 on the magnitudes of active
// connections in both layers.
template <class S>
double loss(const std::vector<S>& logits, std::span<const int> labels,
            const NetState<S>& net) {
  const int O = net.cfg.n_out;
  const int batch = int(labels.size());
  if (logits.size() != std::size_t(batch) * O)
    throw DimensionError("loss: logits shape mismatch");
  double ce = 0.0;
  std::vector<double> probs;
  for (int b = 0; b < batch; ++b) {
    if (labels[b] < 0 || labels[b] >= O)
      throw ConfigError("loss: label " + std::to_string(labels[b]) +
                        " out of range [0, " + std::to_string(O) + ")");
    softmax_row(&logits[std::size_t(b) * O], O, probs);
    ce -= std::log(std::max(probs[std::size_t(labels[b])], 1e-300));
  }
  ce /= double(batch);
  double l1 = 0.0;
  for (S v : net.l1.theta)
    if (v > S(0)) l1 += double(v);
  for (S v : net.l2.theta)
    if (v > S(0)) l1 += double(v);
  return ce + net.cfg.l1_strength * l1;
}

// Reverse-mode pass through the whole pipeline. The spike nonlinearity uses
// the surrogate derivative; the reset multiplication is detached (no
// gradient flows through the 1 - s factor). Candidate gradients
// (straight-through dL/dtheta for every connection, dormant included) come
// out of the same tap-gradient contraction.
template <class S>
GradientSet<S> backward_pass(const ForwardCache<S>& cache,
                             std::span<const int> labels,
                             const NetState<S>& net) {
  if (!cache.training)
    throw StateError("backward_pass: requires a training-mode forward cache");
  const NetConfig& cfg = net.cfg;
  const int T = cfg.t_steps, C = cfg.n_in, H = cfg.n_hidden, O = cfg.n_out;
  const int B = cache.batch;
  const int t_d = cfg.t_d_max;
  if (int(labels.size()) != B)
    throw DimensionError("backward_pass: label count mismatch");

  const S lambda = S(cfg.lif.decay());
  const S thr = S(cfg.lif.threshold);
  const S sur_scale = S(cfg.lif.surrogate_scale);

  // dL/dlogits for mean cross-entropy
  std::vector<S> dlogits(std::size_t(B) * O);
  std::vector<double> probs;
  for (int b = 0; b < B; ++b) {
    softmax_row(&cache.logits[std::size_t(b) * O], O, probs);
    for (int o = 0; o < O; ++o)
      dlogits[std::size_t(b) * O + o] =
          S((probs[o] - (o == labels[b] ? 1.0 : 0.0)) / double(B));
  }

  std::vector<S> kbar1(std::size_t(C) * (t_d + 1) * H, S(0));
  std::vector<S> kbar2(std::size_t(H) * (t_d + 1) * O, S(0));
  std::vector<S> xbn_bar(std::size_t(B) * T * C, S(0));

  std::vector<S> i2_bar(std::size_t(T) * O), i1_bar(std::size_t(T) * H);
  std::vector<S> acc_o(O), acc_h(H);
  std::vector<S> y1_b(std::size_t(T) * H), xbn_b(std::size_t(T) * C);
  std::vector<std::uint8_t> mask_b(std::size_t(T) * H);

  for (int b = 0; b < B; ++b) {
    const std::size_t h_off = std::size_t(b) * T * H;
    const std::size_t c_off = std::size_t(b) * T * C;

    // readout (non-spiking leaky integrator) adjoint
    std::fill(acc_o.begin(), acc_o.end(), S(0));
    std::fill(i2_bar.begin(), i2_bar.end(), S(0));
    for (int t = T - 1; t >= 0; --t) {
      for (int o = 0; o < O; ++o) {
        S direct;
        if (cfg.readout == ReadoutMode::kMean) {
          direct = dlogits[std::size_t(b) * O + o] / S(T);
        } else {
          direct = (cache.readout_argmax[std::size_t(b) * O + o] == t)
                       ? dlogits[std::size_t(b) * O + o]
                       : S(0);
        }
        acc_o[o] = direct + lambda * acc_o[o];
        if (t > 0) i2_bar[std::size_t(t - 1) * O + o] = acc_o[o];
      }
    }

    y1_b.assign(cache.y1.begin() + h_off,
                cache.y1.begin() + h_off + std::size_t(T) * H);
    conv_kernel_grad(y1_b, i2_bar, T, H, O, t_d, kbar2);
    std::vector<S> y1_bar = conv_input_grad(i2_bar, T, cache.bank2);

    mask_b.assign(cache.drop_mask.begin() + h_off,
                  cache.drop_mask.begin() + h_off + std::size_t(T) * H);
    std::vector<S> s1_bar = dropout_backward(y1_bar, mask_b, cfg.dropout_p);

    // hidden (spiking) adjoint; reset path detached
    std::fill(acc_h.begin(), acc_h.end(), S(0));
    std::fill(i1_bar.begin(), i1_bar.end(), S(0));
    for (int t = T - 1; t >= 0; --t) {
      for (int h = 0; h < H; ++h) {
        const std::size_t e = h_off + std::size_t(t) * H + h;
        const S g = surrogate_grad(cache.u1[e] - thr, sur_scale);
        const S u_bar = s1_bar[std::size_t(t) * H + h] * g +
                        (S(1) - cache.s1[e]) * lambda * acc_h[h];
        acc_h[h] = u_bar;
        if (t > 0) i1_bar[std::size_t(t - 1) * H + h] = u_bar;
      }
    }

    xbn_b.assign(cache.xbn.begin() + c_off,
                 cache.xbn.begin() + c_off + std::size_t(T) * C);
    conv_kernel_grad(xbn_b, i1_bar, T, C, H, t_d, kbar1);
    std::vector<S> xb_bar = conv_input_grad(i1_bar, T, cache.bank1);
    std::copy(xb_bar.begin(), xb_bar.end(), xbn_bar.begin() + c_off);
  }

  GradientSet<S> gr;
  bn_param_grads(xbn_bar, cache.bn, C, gr.gamma, gr.beta);

  const std::vector<S> w1 = net.l1.effective_weights();
  const std::vector<S> w2 = net.l2.effective_weights();
  std::vector<S> dw1, dd1, dw2, dd2;
  kernel_param_grads(kbar1, w1.data(), net.l1.delay.data(), C, H, t_d,
                     net.sigma, dw1, dd1);
  kernel_param_grads(kbar2, w2.data(), net.l2.delay.data(), H, O, t_d,
                     net.sigma, dw2, dd2);

  auto fold = [&](const SparseLayerState<S>& st, const std::vector<S>& dw,
                  std::vector<S>& dd, std::vector<S>& d_theta,
                  std::vector<S>& cand) {
    const std::size_t size = st.size();
    d_theta.assign(size, S(0));
    cand.resize(size);
    for (std::size_t e = 0; e < size; ++e) {
      const S st_grad = S(st.sign[e]) * dw[e];
      cand[e] = st_grad;
      if (st.theta[e] > S(0))
        d_theta[e] = st_grad + S(cfg.l1_strength);
      else
        dd[e] = S(0);
    }
    if (!cfg.learn_delays) std::fill(dd.begin(), dd.end(), S(0));
  };
  fold(net.l1, dw1, dd1, gr.theta1, gr.cand1);
  fold(net.l2, dw2, dd2, gr.theta2, gr.cand2);
  gr.delay1 = std::move(dd1);
  gr.delay2 = std::move(dd2);
  return gr;
}

constexpr double kAdamBeta1 = 0.9, kAdamBeta2 = 0.999, kAdamEps = 1e-8;

template <class S>
struct AdamSlots {
  std::vector<S> m, v;
  void init(std::size_t n) {
    m.assign(n, S(0));
    v.assign(n, S(0));
  }
  void reset(std::size_t e) {
    m[e] = S(0);
    v[e] = S(0);
  }
};

// Standard Adam with bias correction; entries where skip(e) holds are left
// untouched, moments included.
template <class S, class Skip>
void adam_update(std::vector<S>& p, const std::vector<S>& g, AdamSlots<S>& sl,
                 double lr, long t, Skip&& skip) {
  const double bc1 = 1.0 - std::pow(kAdamBeta1, double(t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, double(t));
  for (std::size_t e = 0; e < p.size(); ++e) {
    if (skip(e)) continue;
    sl.m[e] = S(kAdamBeta1) * sl.m[e] + S(1.0 - kAdamBeta1) * g[e];
    sl.v[e] = S(kAdamBeta2) * sl.v[e] + S(1.0 - kAdamBeta2) * g[e] * g[e];
    const double mhat = double(sl.m[e]) / bc1;
    const double vhat = double(sl.v[e]) / bc2;
    p[e] -= S(lr * mhat / (std::sqrt(vhat) + kAdamEps));
  }
}

struct MetricsRow {
  int epoch = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
  long active_synapses_l1 = 0;
  long active_synapses_l2 = 0;
  double sigma = 0.0;
};

template <class S>
struct TrainHooks {
  std::function<void(const NetState<S>&, long step)> after_step;
  std::function<void(const NetState<S>&, int epoch, long step)> after_rewire;
  std::function<void(const NetState<S>&, const MetricsRow&)> on_epoch;
};

template <class S>
struct TrainResult {
  NetState<S> net;
  std::vector<MetricsRow> metrics;
};

inline std::pair<std::vector<int>, std::vector<int>> split_train_test(
    int n, double test_fraction, std::uint64_t seed) {
  if (n < 1) throw DimensionError("split: empty dataset");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = make_rng(seed, kRngSplit);
  for (int i = 0; i < n - 1; ++i) {
    const std::size_t j = i + std::size_t(uniform01(rng) * double(n - i));
    std::swap(idx[i], idx[std::min(j, std::size_t(n) - 1)]);
  }
  int n_test = test_fraction > 0.0
                   ? std::max(1, int(std::lround(test_fraction * n)))
                   : 0;
  if (n - n_test < 1)
    throw DimensionError("split: dataset too small for requested test fraction");
  std::vector<int> train(idx.begin(), idx.end() - n_test);
  std::vector<int> test(idx.end() - n_test, idx.end());
  return {train, test};
}

template <class S>
double evaluate(NetState<S>& net, const Dataset& data, std::span<const int> idx,
                int batch_size, bool round_delays) {
  if (idx.empty()) throw DimensionError("evaluate: empty dataset");
  const NetConfig& cfg = net.cfg;
  const int T = cfg.t_steps, C = cfg.n_in, O = cfg.n_out;

  std::vector<S> saved1, saved2;
  if (round_delays) {
    saved1 = net.l1.delay;
    saved2 = net.l2.delay;
    auto snap = [&](std::vector<S>& d) {
      for (S& v : d)
        v = std::clamp(S(double(round_half_even(double(v)))), S(0),
                       S(cfg.t_d_max));
    };
    snap(net.l1.delay);
    snap(net.l2.delay);
  }

  std::mt19937_64 dummy_rng(0);
  long correct = 0;
  std::vector<S> xb;
  for (std::size_t begin = 0; begin < idx.size(); begin += batch_size) {
    const int bs = int(std::min(idx.size() - begin, std::size_t(batch_size)));
    xb.resize(std::size_t(bs) * T * C);
    for (int b = 0; b < bs; ++b) {
      const float* src = data.sample(idx[begin + b]);
      for (int e = 0; e < T * C; ++e)
        xb[std::size_t(b) * T * C + e] = S(src[e]);
    }
    std::vector<S> logits =
        forward_pass(xb, bs, net, false, dummy_rng, (ForwardCache<S>*)nullptr);
    for (int b = 0; b < bs; ++b) {
      const S* row = &logits[std::size_t(b) * O];
      int arg = 0;
      for (int o = 1; o < O; ++o)
        if (row[o] > row[arg]) arg = o;
      correct += (arg == data.labels[idx[begin + b]]);
    }
  }

  if (round_delays) {
    net.l1.delay = std::move(saved1);
    net.l2.delay = std::move(saved2);
  }
  return double(correct) / double(idx.size());
}

// Full training protocol: per epoch, shuffle and iterate batches (forward,
// loss, backward, Adam with the scheduled rates, delay clamp), then anneal
// sigma, then rewire at the configured cadence. Dormant parameters (theta
// <= 0) are frozen until a rewiring event revives them.
template <class S>
TrainResult<S> train(const Dataset& data, const NetConfig& cfg,
                     const TrainPlan& plan, const TrainHooks<S>& hooks = {}) {
  cfg.validate();
  plan.validate();
  if (data.n < 1) throw DimensionError("train: empty dataset");
  if (data.t_steps != cfg.t_steps || data.channels != cfg.n_in)
    throw ConfigError("train: dataset shape [" + std::to_string(data.t_steps) +
                      " x " + std::to_string(data.channels) +
                      "] does not match config [" +
                      std::to_string(cfg.t_steps) + " x " +
                      std::to_string(cfg.n_in) + "]");
  for (int l : data.labels)
    if (l < 0 || l >= cfg.n_out)
      throw ConfigError("train: label " + std::to_string(l) +
                        " out of range for n_out=" + std::to_string(cfg.n_out));

  auto [train_idx, test_idx] =
      split_train_test(data.n, plan.test_fraction, cfg.seed);

  TrainResult<S> res;
  res.net = init_net<S>(cfg);
  NetState<S>& net = res.net;

  SigmaSchedule ssched{cfg.sigma_start, cfg.sigma_final, cfg.sigma_knee_frac,
                       plan.epochs};
  net.sigma = plan.epochs > 0 ? anneal_sigma(0, ssched) : cfg.sigma_start;

  auto dropout_rng = make_rng(cfg.seed, kRngDropout);
  auto grow_rng = make_rng(cfg.seed, kRngGrow);

  struct Opt {
    AdamSlots<S> th1, th2, d1, d2, g, b;
  } opt;
  opt.th1.init(net.l1.size());
  opt.th2.init(net.l2.size());
  opt.d1.init(net.l1.size());
  opt.d2.init(net.l2.size());
  opt.g.init(cfg.n_in);
  opt.b.init(cfg.n_in);

  std::vector<S> cand1(net.l1.size(), S(0)), cand2(net.l2.size(), S(0));

  const int n_train = int(train_idx.size());
  const long steps_per_epoch = (n_train + plan.batch_size - 1) / plan.batch_size;
  const long total_steps = steps_per_epoch * plan.epochs;
  long step = 0;

  auto do_rewire = [&](int epoch) {
    auto apply = [&](SparseLayerState<S>& st, std::vector<S>& cand,
                     AdamSlots<S>& th_slots, AdamSlots<S>& d_slots) {
      RewireResult<S> rr =
          rewire_step(st, cfg.sparsity, std::span<const S>(cand),
                      double(cfg.t_d_max), grow_rng);
      for (std::int64_t e : rr.grown) {
        th_slots.reset(std::size_t(e));
        d_slots.reset(std::size_t(e));
      }
      std::fill(cand.begin(), cand.end(), S(0));
    };
    apply(net.l1, cand1, opt.th1, opt.d1);
    apply(net.l2, cand2, opt.th2, opt.d2);
    if (hooks.after_rewire) hooks.after_rewire(net, epoch, step);
  };

  const int T = cfg.t_steps, C = cfg.n_in;
  std::vector<S> xb;
  std::vector<int> yb;
  std::vector<std::uint8_t> dormant1(net.l1.size()), dormant2(net.l2.size());

  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    const double sigma_used = net.sigma;
    auto shuffle_rng =
        make_rng(cfg.seed, kRngShuffleBase + std::uint64_t(epoch) * 0x10001ULL);
    std::vector<int> order = train_idx;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j =
          i + std::size_t(uniform01(shuffle_rng) * double(order.size() - i));
      std::swap(order[i], order[std::min(j, order.size() - 1)]);
    }

    double loss_sum = 0.0;
    for (int begin = 0; begin < n_train; begin += plan.batch_size) {
      const int bs = std::min(plan.batch_size, n_train - begin);
      xb.resize(std::size_t(bs) * T * C);
      yb.resize(bs);
      for (int b = 0; b < bs; ++b) {
        const float* src = data.sample(order[begin + b]);
        for (int e = 0; e < T * C; ++e)
          xb[std::size_t(b) * T * C + e] = S(src[e]);
        yb[b] = data.labels[order[begin + b]];
      }

      ForwardCache<S> cache;
      std::vector<S> logits = forward_pass(xb, bs, net, true, dropout_rng, &cache);
      loss_sum += loss(logits, yb, net) * bs;
      GradientSet<S> gr = backward_pass(cache, yb, net);

      for (std::size_t e = 0; e < cand1.size(); ++e) cand1[e] += gr.cand1[e];
      for (std::size_t e = 0; e < cand2.size(); ++e) cand2[e] += gr.cand2[e];

      ++step;
      const LrPair lr = schedule_lr(step, total_steps, plan);

      for (std::size_t e = 0; e < dormant1.size(); ++e)
        dormant1[e] = net.l1.theta[e] <= S(0);
      for (std::size_t e = 0; e < dormant2.size(); ++e)
        dormant2[e] = net.l2.theta[e] <= S(0);
      auto skip1 = [&](std::size_t e) { return dormant1[e] != 0; };
      auto skip2 = [&](std::size_t e) { return dormant2[e] != 0; };
      auto no_skip = [](std::size_t) { return false; };

      adam_update(net.l1.theta, gr.theta1, opt.th1, lr.w, step, skip1);
      adam_update(net.l2.theta, gr.theta2, opt.th2, lr.w, step, skip2);
      adam_update(net.bn.gamma, gr.gamma, opt.g, lr.w, step, no_skip);
      adam_update(net.bn.beta, gr.beta, opt.b, lr.w, step, no_skip);
      if (cfg.learn_delays) {
        adam_update(net.l1.delay, gr.delay1, opt.d1, lr.d, step, skip1);
        adam_update(net.l2.delay, gr.delay2, opt.d2, lr.d, step, skip2);
      }
      clamp_delays(net.l1.delay, double(cfg.t_d_max));
      clamp_delays(net.l2.delay, double(cfg.t_d_max));

      if (cfg.sparsity.cadence > 0 && step % cfg.sparsity.cadence == 0)
        do_rewire(epoch);
      if (hooks.after_step) hooks.after_step(net, step);
    }

    net.sigma = anneal_sigma(epoch + 1, ssched);
    if (cfg.sparsity.cadence == 0) do_rewire(epoch);

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / double(n_train);
    row.test_acc = test_idx.empty()
                       ? 0.0
                       : evaluate(net, data, test_idx, plan.batch_size, false);
    row.active_synapses_l1 = long(net.l1.count_active());
    row.active_synapses_l2 = long(net.l2.count_active());
    row.sigma = sigma_used;
    res.metrics.push_back(row);
    net.epochs_done = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(net, row);
  }
  return res;
}

}  // namespace dsnn
