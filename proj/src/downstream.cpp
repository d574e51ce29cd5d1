#include "latpred/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace latpred {

PairwiseStats pairwise_compare(std::span<const std::uint32_t> yhat_a,
                               std::span<const std::uint32_t> yhat_b,
                               std::span<const std::uint32_t> y_a,
                               std::span<const std::uint32_t> y_b) {
  const std::size_t n = y_a.size();
  if (n == 0) throw std::invalid_argument("pairwise_compare: empty input");
  if (yhat_a.size() != n || yhat_b.size() != n || y_b.size() != n) {
    throw std::invalid_argument("pairwise_compare: length mismatch");
  }
  std::uint64_t match = 0, better = 0, nonzero = 0;
  for (std::size_t i = 0; i < n; ++i) {
    match += (yhat_a[i] <= yhat_b[i]) == (y_a[i] <= y_b[i]);
    better += y_a[i] < y_b[i];
    nonzero += std::max(y_a[i], y_b[i]) > 0;
  }
  const double dn = static_cast<double>(n);
  return {static_cast<double>(match) / dn, static_cast<double>(better) / dn,
          static_cast<double>(nonzero) / dn, n};
}

namespace {

// Sorts v in place and returns the number of strictly inverted pairs.
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo,
                          std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Sum over runs of equal adjacent values of len*(len-1)/2, for sorted input.
template <typename It, typename Eq>
std::uint64_t tied_pairs(It first, It last, Eq eq) {
  std::uint64_t total = 0;
  while (first != last) {
    It run = first;
    std::uint64_t len = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++len;
    }
    total += len * (len - 1) / 2;
    first = run;
  }
  return total;
}

}  // namespace

double kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("kendall_tau_b: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("kendall_tau_b: need at least two elements");

  std::vector<std::pair<double, double>> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {xs[i], ys[i]};
  std::sort(pts.begin(), pts.end());

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 =
      tied_pairs(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first == b.first; });
  const std::uint64_t n3 = tied_pairs(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a == b; });

  std::vector<double> yv(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) yv[i] = pts[i].second;
  const std::uint64_t swaps = merge_count(yv, tmp, 0, n);
  const std::uint64_t n2 = tied_pairs(yv.begin(), yv.end(), std::equal_to<>());

  if (n1 == n0 || n2 == n0) return 0.0;
  const double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                     static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return num / den;
}

std::vector<double> group_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[idx[j]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

RankingStats rank_configs(const std::vector<std::span<const std::uint32_t>>& yhat,
                          const std::vector<std::span<const std::uint32_t>>& y) {
  const std::size_t k = y.size();
  if (k < 2 || yhat.size() != k) throw std::invalid_argument("rank_configs: need K >= 2 aligned configs");
  const std::size_t n = y[0].size();
  if (n == 0) throw std::invalid_argument("rank_configs: empty input");
  for (std::size_t c = 0; c < k; ++c) {
    if (y[c].size() != n || yhat[c].size() != n) {
      throw std::invalid_argument("rank_configs: misaligned sequences");
    }
  }
  RankingStats s;
  s.n = n;
  std::vector<double> p(k), g(k);
  double tau_sum = 0.0;
  std::uint64_t full = 0, best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      p[c] = yhat[c][i];
      g[c] = y[c][i];
    }
    const auto rp = group_ranks(p);
    const auto rg = group_ranks(g);
    full += rp == rg;
    const auto best_p = std::min_element(p.begin(), p.end()) - p.begin();
    const auto best_g = std::min_element(g.begin(), g.end()) - g.begin();
    best += best_p == best_g;
    const bool p_tied = std::all_of(p.begin(), p.end(), [&](double v) { return v == p[0]; });
    const bool g_tied = std::all_of(g.begin(), g.end(), [&](double v) { return v == g[0]; });
    if (p_tied || g_tied) {
      ++s.tau_excluded;
    } else {
      tau_sum += kendall_tau_b(p, g);
    }
  }
  const double dn = static_cast<double>(n);
  const std::uint64_t counted = n - s.tau_excluded;
  s.kendall_tau_mean = counted ? tau_sum / static_cast<double>(counted) : 0.0;
  s.full_match_rate = static_cast<double>(full) / dn;
  s.best_match_rate = static_cast<double>(best) / dn;
  return s;
}

void write_pairwise_csv(std::ostream& out,
                        const std::vector<std::pair<std::string, PairwiseStats>>& rows) {
  out << "pair,match_rate,gt_better,non_zero,n\n";
  out.precision(9);
  for (const auto& [name, s] : rows) {
    out << name << ',' << s.match_rate << ',' << s.gt_better << ',' << s.non_zero << ',' << s.n << '\n';
  }
}

void write_ranking_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, RankingStats>>& rows) {
  out << "benchmark,kendall_tau,full_pct,best_pct,n,tau_excluded\n";
  out.precision(9);
  for (const auto& [name, s] : rows) {
    out << name << ',' << s.kendall_tau_mean << ',' << 100.0 * s.full_match_rate << ','
        << 100.0 * s.best_match_rate << ',' << s.n << ',' << s.tau_excluded << '\n';
  }
}

}  // namespace latpred
