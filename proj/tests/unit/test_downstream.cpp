#include <doctest.h>

#include <functional>

#include "../oracles/oracles.hpp"
#include "latpred/downstream.hpp"
#include "latpred/rng.hpp"

using namespace latpred;

namespace {

using Seq = std::vector<std::uint32_t>;

std::vector<std::span<const std::uint32_t>> spans(const std::vector<Seq>& v) {
  return {v.begin(), v.end()};
}

// Calls fn on every sequence of length len over {0, 1, 2}.
void each_ternary(std::size_t len, const std::function<void(const std::vector<double>&)>& fn) {
  std::vector<double> v(len, 0.0);
  while (true) {
    fn(v);
    std::size_t i = 0;
    while (i < len && v[i] == 2.0) v[i++] = 0.0;
    if (i == len) return;
    v[i] += 1.0;
  }
}

}  // namespace

TEST_CASE("pairwise statistics") {
  const Seq same = {1, 2, 3};
  auto s = pairwise_compare(same, same, same, same);
  CHECK(s.match_rate == 1.0);
  CHECK(s.gt_better == 0.0);

  const Seq ya = {0, 2, 5}, yb = {0, 3, 1};
  s = pairwise_compare(ya, yb, ya, yb);
  CHECK(s.match_rate == 1.0);
  CHECK(s.gt_better == doctest::Approx(1.0 / 3));
  CHECK(s.non_zero == doctest::Approx(2.0 / 3));
  CHECK(s.n == 3);
  CHECK_THROWS(pairwise_compare(ya, yb, ya, Seq{1}));
  CHECK_THROWS(pairwise_compare({}, {}, {}, {}));

  Rng rng(3);
  Seq pa(1000), pb(1000), ga(1000), gb(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    pa[i] = static_cast<std::uint32_t>(rng.below(4));
    pb[i] = static_cast<std::uint32_t>(rng.below(4));
    ga[i] = static_cast<std::uint32_t>(rng.below(4));
    gb[i] = static_cast<std::uint32_t>(rng.below(4));
  }
  s = pairwise_compare(pa, pb, ga, gb);
  double m = 0, b = 0, nz = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    m += (pa[i] <= pb[i]) == (ga[i] <= gb[i]);
    b += ga[i] < gb[i];
    nz += ga[i] > 0 || gb[i] > 0;
  }
  CHECK(s.match_rate == m / 1000);
  CHECK(s.gt_better == b / 1000);
  CHECK(s.non_zero == nz / 1000);
  const auto swapped = pairwise_compare(pb, pa, gb, ga);
  double ms = 0;
  for (std::size_t i = 0; i < 1000; ++i) ms += (pb[i] <= pa[i]) == (gb[i] <= ga[i]);
  CHECK(swapped.match_rate == ms / 1000);
}

TEST_CASE("kendall tau-b") {
  const std::vector<double> up = {1, 2, 3, 4, 5}, down = {5, 4, 3, 2, 1};
  CHECK(kendall_tau_b(up, up) == doctest::Approx(1.0));
  CHECK(kendall_tau_b(up, down) == doctest::Approx(-1.0));
  const std::vector<double> xs = {1, 2, 2, 3}, ys = {1, 3, 2, 4};
  CHECK(kendall_tau_b(xs, ys) == doctest::Approx(oracle::tau_b(xs, ys)).epsilon(1e-12));
  CHECK(kendall_tau_b(std::vector<double>{2, 2, 2}, std::span(up).first(3)) == 0.0);
  CHECK_THROWS(kendall_tau_b(std::vector<double>{1}, std::vector<double>{1}));

  for (std::size_t len = 2; len <= 6; ++len) {
    each_ternary(len, [&](const std::vector<double>& x) {
      each_ternary(len, [&](const std::vector<double>& y) {
        REQUIRE(kendall_tau_b(x, y) == doctest::Approx(oracle::tau_b(x, y)).epsilon(1e-12));
      });
    });
  }
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.below(200);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = double(rng.below(20));
      y[i] = double(rng.below(20));
    }
    REQUIRE(kendall_tau_b(x, y) == doctest::Approx(oracle::tau_b(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("group ranks average ties") {
  const std::vector<double> v = {10, 20, 10, 5, 20};
  CHECK(group_ranks(v) == std::vector<double>{2.5, 4.5, 2.5, 1, 4.5});
}

TEST_CASE("ranking statistics") {
  Rng rng(8);
  std::vector<Seq> y(5, Seq(200)), yh(5, Seq(200));
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t i = 0; i < 200; ++i) y[c][i] = static_cast<std::uint32_t>(rng.below(4));
  }
  SUBCASE("perfect predictions") {
    const auto r = rank_configs(spans(y), spans(y));
    CHECK(r.full_match_rate == 1.0);
    CHECK(r.best_match_rate == 1.0);
    CHECK(r.kendall_tau_mean == doctest::Approx(1.0));
  }
  SUBCASE("all tied") {
    std::vector<Seq> flat(5, Seq(3, 7));
    const auto r = rank_configs(spans(flat), spans(flat));
    CHECK(r.full_match_rate == 1.0);
    CHECK(r.best_match_rate == 1.0);
    CHECK(r.tau_excluded == 3);
    CHECK(r.kendall_tau_mean == 0.0);
  }
  SUBCASE("random against brute force") {
    for (std::size_t c = 0; c < 5; ++c) {
      for (std::size_t i = 0; i < 200; ++i) yh[c][i] = static_cast<std::uint32_t>(rng.below(4));
    }
    const auto r = rank_configs(spans(yh), spans(y));
    const auto o = oracle::ranking(yh, y);
    CHECK(r.kendall_tau_mean == doctest::Approx(o.tau_mean).epsilon(1e-12));
    CHECK(r.full_match_rate == o.full);
    CHECK(r.best_match_rate == o.best);
    // strictly increasing transforms leave everything unchanged
    auto ty = y, tyh = yh;
    for (auto* v : {&ty, &tyh}) {
      for (auto& s : *v) {
        for (auto& e : s) e = e * e * 3 + 1;
      }
    }
    const auto t = rank_configs(spans(tyh), spans(ty));
    CHECK(t.kendall_tau_mean == r.kendall_tau_mean);
    CHECK(t.full_match_rate == r.full_match_rate);
    CHECK(t.best_match_rate == r.best_match_rate);
  }
  SUBCASE("two configs agree with pairwise semantics when ties are absent") {
    std::vector<Seq> g2(2, Seq(300)), p2(2, Seq(300));
    for (std::size_t i = 0; i < 300; ++i) {
      g2[0][i] = static_cast<std::uint32_t>(2 * rng.below(50));
      g2[1][i] = g2[0][i] + (rng.bernoulli(0.5) ? 1 : -1) + (g2[0][i] == 0 ? 2 : 0);
      p2[0][i] = static_cast<std::uint32_t>(2 * rng.below(50));
      p2[1][i] = p2[0][i] + (rng.bernoulli(0.5) ? 1 : -1) + (p2[0][i] == 0 ? 2 : 0);
    }
    const auto r = rank_configs(spans(p2), spans(g2));
    const auto pw = pairwise_compare(p2[0], p2[1], g2[0], g2[1]);
    CHECK(r.best_match_rate == pw.match_rate);
  }
  CHECK_THROWS(rank_configs(spans(y), spans(std::vector<Seq>(4, Seq(200)))));
}
