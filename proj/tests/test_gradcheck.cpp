#include <vector>

#include "doctest.h"
#include "dsnn/trainer.hpp"
#include "gradcheck_util.hpp"

using namespace dsnn;
using namespace dsnn_test;

namespace {

struct Fixture {
  NetConfig cfg;
  NetState<double> net;
  std::vector<double> features;
  std::vector<int> labels;
  ForwardCache<double> cache;
  GradientSet<double> analytic;

  Fixture() {
    cfg.n_in = 3;
    cfg.n_hidden = 4;
    cfg.n_out = 2;
    cfg.t_steps = 10;
    cfg.t_d_max = 4;
    cfg.sigma_start = 1.5;
    cfg.sigma_final = 0.5;
    cfg.dropout_p = 0.0;
    cfg.l1_strength = 0.01;
    cfg.seed = 2024;

    net = init_net<double>(cfg);
    net.sigma = 1.5;
    // keep every magnitude clearly positive so the dormancy kink at zero
    // stays out of finite-difference range
    for (auto& v : net.l1.theta) v = std::max(v, 0.25);
    for (auto& v : net.l2.theta) v = std::max(v, 0.25);

    auto rng = make_rng(77, 0);
    features.resize(2 * cfg.t_steps * cfg.n_in);
    for (auto& v : features) v = normal01(rng) * 1.3;
    labels = {0, 1};

    std::mt19937_64 drop_rng(0);
    forward_pass(features, 2, net, true, drop_rng, &cache);
    analytic = backward_pass(cache, labels, net);
  }

  double analytic_of(PGroup g, std::size_t e) const {
    switch (g) {
      case PGroup::kTheta1: return analytic.theta1[e];
      case PGroup::kDelay1: return analytic.delay1[e];
      case PGroup::kTheta2: return analytic.theta2[e];
      case PGroup::kDelay2: return analytic.delay2[e];
      case PGroup::kGamma: return analytic.gamma[e];
      default: return analytic.beta[e];
    }
  }

  std::size_t group_size(PGroup g) const {
    switch (g) {
      case PGroup::kTheta1:
      case PGroup::kDelay1: return net.l1.size();
      case PGroup::kTheta2:
      case PGroup::kDelay2: return net.l2.size();
      default: return std::size_t(cfg.n_in);
    }
  }
};

}  // namespace

TEST_CASE("surrogate-BPTT gradients match the frozen-raster oracle") {
  Fixture fx;

  // the check is only meaningful if the hidden layer actually fires
  double n_spikes = 0.0;
  for (double s : fx.cache.s1) n_spikes += s;
  REQUIRE(n_spikes >= 3.0);

  const double h = 1e-5;
  GradCheckStats stats;
  for (PGroup g : {PGroup::kTheta1, PGroup::kDelay1, PGroup::kTheta2,
                   PGroup::kDelay2, PGroup::kGamma, PGroup::kBeta}) {
    for (std::size_t e = 0; e < fx.group_size(g); ++e) {
      auto plus = fx.net, minus = fx.net;
      param_ref(plus, g, e) += h;
      param_ref(minus, g, e) -= h;
      const double fp =
          lifted_loss(plus, fx.features, 2, fx.labels, fx.cache.u1, fx.cache.s1);
      const double fm = lifted_loss(minus, fx.features, 2, fx.labels,
                                    fx.cache.u1, fx.cache.s1);
      const double fd = (fp - fm) / (2 * h);
      const double an = fx.analytic_of(g, e);
      const double err = rel_err(an, fd);
      stats.max_rel_err = std::max(stats.max_rel_err, err);
      ++stats.checked;
      CHECK(err <= 1e-4);
    }
  }
  CHECK(stats.checked == 46);
}

TEST_CASE("downstream parameters also match the hard loss directly") {
  Fixture fx;
  const double h = 1e-5;
  GradCheckStats stats;
  for (PGroup g : {PGroup::kTheta2, PGroup::kDelay2}) {
    for (std::size_t e = 0; e < fx.group_size(g); ++e) {
      auto plus = fx.net, minus = fx.net;
      param_ref(plus, g, e) += h;
      param_ref(minus, g, e) -= h;
      const auto fp = hard_loss(plus, fx.features, 2, fx.labels, fx.cache.s1);
      const auto fm = hard_loss(minus, fx.features, 2, fx.labels, fx.cache.s1);
      if (fp.raster_changed || fm.raster_changed) {
        ++stats.flipped;
        continue;
      }
      const double fd = (fp.value - fm.value) / (2 * h);
      const double err = rel_err(fx.analytic_of(g, e), fd);
      stats.max_rel_err = std::max(stats.max_rel_err, err);
      ++stats.checked;
      CHECK(err <= 1e-3);
    }
  }
  // layer-2 parameters sit below the spiking layer: no flips expected here
  CHECK(stats.flipped == 0);
  CHECK(stats.checked == 16);
}

TEST_CASE("the lifted objective coincides with the real loss at the center") {
  Fixture fx;
  const double lifted =
      lifted_loss(fx.net, fx.features, 2, fx.labels, fx.cache.u1, fx.cache.s1);
  const auto hard = hard_loss(fx.net, fx.features, 2, fx.labels, fx.cache.s1);
  CHECK(!hard.raster_changed);
  CHECK(lifted == doctest::Approx(hard.value).epsilon(1e-12));
}
