#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "dsnn/rewire.hpp"

using namespace dsnn;

namespace {

SparseLayerState<double> make_state(int n_pre, int n_post,
                                    std::vector<double> theta,
                                    std::vector<std::int8_t> sign,
                                    std::int64_t target) {
  SparseLayerState<double> st;
  st.n_pre = n_pre;
  st.n_post = n_post;
  st.theta = std::move(theta);
  st.sign = std::move(sign);
  st.mask.assign(st.size(), 1);
  st.delay.assign(st.size(), 1.0);
  st.target_active = target;
  return st;
}

}  // namespace

TEST_CASE("effective weights: sign times positive part") {
  auto st = make_state(3, 1, {0.3, -0.1, 0.0}, {-1, 1, 1}, 1);
  auto w = st.effective_weights();
  CHECK(w[0] == -0.3);
  CHECK(w[1] == 0.0);  // dormant
  CHECK(w[2] == 0.0);  // zero is not positive, hence dormant
  CHECK(st.count_active() == 1);
}

TEST_CASE("erdos-renyi sparsity adjustment") {
  CHECK(er_sparsity(0.875, 40, 256) ==
        doctest::Approx(0.84970703125).epsilon(1e-12));
  CHECK(er_sparsity(0.9, 2, 2) == 0.0);  // factor vanishes
  CHECK(er_sparsity(0.0, 40, 256) == 0.0);
  CHECK(er_target_active(0.0, 4, 5) == 20);

  // monotone non-decreasing in n_pre * n_post for fixed sum
  double prev = -1.0;
  for (auto [a, b] : {std::pair{2, 10}, {3, 9}, {4, 8}, {5, 7}, {6, 6}}) {
    const double cur = er_sparsity(0.8, a, b);
    CHECK(cur >= prev);
    prev = cur;
  }

  CHECK_THROWS_AS(er_sparsity(1.0, 4, 4), ConfigError);
  CHECK_THROWS_AS(er_sparsity(0.5, 0, 4), DimensionError);
}

TEST_CASE("rigl growth picks the largest signed gradients") {
  const std::vector<std::int64_t> idx = {10, 20, 30, 40};
  const std::vector<double> g = {0.5, -0.2, 0.9, 0.1};
  auto top2 = rigl_grow<double>(idx, g, 2);
  CHECK(top2 == std::vector<std::int64_t>{30, 10});

  // ties break toward the lowest flat index
  const std::vector<double> equal = {0.3, 0.3, 0.3, 0.3};
  auto tied = rigl_grow<double>(idx, equal, 2);
  CHECK(tied == std::vector<std::int64_t>{10, 20});

  CHECK(rigl_grow<double>(idx, g, 0).empty());
  CHECK_THROWS_AS(rigl_grow<double>(idx, g, 5), GrowthExhaustedError);

  auto flipped = rigl_grow<double>(idx, g, 1, true);
  CHECK(flipped == std::vector<std::int64_t>{20});  // most negative
}

TEST_CASE("random growth is a uniform sample without replacement") {
  const std::vector<std::int64_t> idx = {3, 7, 11, 15, 19};
  auto rng = make_rng(5, 0);
  auto all = random_grow(idx, 5, rng);
  CHECK(std::set<std::int64_t>(all.begin(), all.end()) ==
        std::set<std::int64_t>(idx.begin(), idx.end()));

  auto rng2 = make_rng(5, 0);
  CHECK(random_grow(idx, 5, rng2) == all);  // same seed, same pick

  auto rng3 = make_rng(5, 0);
  CHECK(random_grow(idx, 0, rng3).empty());
  CHECK_THROWS_AS(random_grow(idx, 6, rng3), GrowthExhaustedError);

  auto rng4 = make_rng(9, 0);
  auto three = random_grow(idx, 3, rng4);
  std::set<std::int64_t> uniq(three.begin(), three.end());
  CHECK(uniq.size() == 3);
  for (auto e : three) CHECK(std::count(idx.begin(), idx.end(), e) == 1);
}

TEST_CASE("dale signs are constant per column; otherwise i.i.d.") {
  auto rng = make_rng(17, 1);
  auto sign = dale_signs(5, 4, rng, true);
  for (int j = 0; j < 5; ++j)
    for (int i = 1; i < 4; ++i) CHECK(sign[i * 5 + j] == sign[j]);

  // Dale off: with 48x48 entries some column almost surely mixes signs
  auto rng2 = make_rng(17, 2);
  auto free_sign = dale_signs(48, 48, rng2, false);
  bool mixed = false;
  for (int j = 0; j < 48 && !mixed; ++j) {
    bool pos = false, neg = false;
    for (int i = 0; i < 48; ++i)
      (free_sign[i * 48 + j] > 0 ? pos : neg) = true;
    mixed = pos && neg;
  }
  CHECK(mixed);
  for (auto s : free_sign) CHECK((s == 1 || s == -1));
}

TEST_CASE("dale violation counter") {
  auto st = make_state(2, 2, {0.5, 0.1, 0.2, 0.3}, {1, -1, 1, -1}, 4);
  CHECK(dale_violations(st) == 0);  // columns 0: +,+ and 1: -,-
  st.sign = {1, -1, -1, -1};
  CHECK(dale_violations(st) == 1);  // column 0 now mixes
  st.theta[2] = 0.0;                // dormant entries do not count
  CHECK(dale_violations(st) == 0);
}

TEST_CASE("rewire restores the active budget") {
  SparsityPlan plan;
  plan.mode = SparsityMode::kRigl;
  auto rng = make_rng(23, 0);

  // 6 connections, all active, budget 6
  auto st = make_state(3, 2, {0.4, 0.2, 0.3, 0.5, 0.6, 0.1},
                       {1, 1, -1, -1, 1, 1}, 6);
  st.theta[1] = 0.0;  // three entries fall dormant
  st.theta[3] = -0.2;
  st.theta[5] = -0.1;
  const std::vector<double> cand = {0.0, 0.9, 0.0, -0.4, 0.0, 0.7};

  auto res = rewire_step(st, plan, std::span<const double>(cand), 10.0, rng);
  CHECK(res.grown.size() == 3);
  CHECK(st.count_active() == 6);
  // deficit 3 with a 3-entry pool: everything revives regardless of grads
  for (auto e : {1, 3, 5}) {
    CHECK(st.theta[e] == kGrowEpsilon);
    CHECK(st.delay[e] >= 0.0);
    CHECK(st.delay[e] <= 10.0);
  }

  // no deficit: untouched
  auto before = st.theta;
  auto res2 = rewire_step(st, plan, std::span<const double>(cand), 10.0, rng);
  CHECK(res2.grown.empty());
  CHECK(st.theta == before);
}

TEST_CASE("rigl growth ranks the dormant pool by candidate gradient") {
  SparsityPlan plan;
  plan.mode = SparsityMode::kRigl;
  auto rng = make_rng(31, 0);
  auto st = make_state(4, 1, {0.0, 0.0, 0.0, 0.8}, {1, 1, 1, 1}, 2);
  const std::vector<double> cand = {0.2, 0.9, -0.3, 0.0};
  auto res = rewire_step(st, plan, std::span<const double>(cand), 5.0, rng);
  CHECK(res.grown == std::vector<std::int64_t>{1});
  CHECK(st.count_active() == 2);
}

TEST_CASE("fixed and dense modes never rewire") {
  auto rng = make_rng(37, 0);
  const std::vector<double> cand = {1.0, 1.0, 1.0, 1.0};
  for (auto mode : {SparsityMode::kFixed, SparsityMode::kDense}) {
    SparsityPlan plan;
    plan.mode = mode;
    auto st = make_state(2, 2, {0.0, 0.0, 0.5, 0.5}, {1, 1, 1, 1}, 4);
    auto res = rewire_step(st, plan, std::span<const double>(cand), 5.0, rng);
    CHECK(res.grown.empty());
    CHECK(st.theta[0] == 0.0);
    CHECK(st.theta[1] == 0.0);
  }
}

TEST_CASE("an over-committed budget drains the pool with a warning") {
  SparsityPlan plan;
  plan.mode = SparsityMode::kRandom;
  auto rng = make_rng(41, 0);
  auto st = make_state(2, 1, {0.0, 0.0}, {1, 1}, 5);  // target beyond layer
  const std::vector<double> cand = {0.0, 0.0};
  auto res = rewire_step(st, plan, std::span<const double>(cand), 5.0, rng);
  CHECK(res.exhausted);
  CHECK(res.grown.size() == 2);
  CHECK(st.count_active() == 2);
}

TEST_CASE("sparsity mode names round-trip") {
  for (auto m : {SparsityMode::kDense, SparsityMode::kFixed,
                 SparsityMode::kRandom, SparsityMode::kRigl})
    CHECK(parse_sparsity_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_sparsity_mode("bogus"), ConfigError);
}
