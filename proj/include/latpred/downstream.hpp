#pragma once

// A/B analyses over per-instruction latencies from several configurations of
// the same retired instruction stream.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace latpred {

struct PairwiseStats {
  double match_rate = 0.0;  // predicted (a <= b) agrees with ground truth
  double gt_better = 0.0;   // y_a < y_b
  double non_zero = 0.0;    // max(y_a, y_b) > 0
  std::uint64_t n = 0;
};

PairwiseStats pairwise_compare(std::span<const std::uint32_t> yhat_a,
                               std::span<const std::uint32_t> yhat_b,
                               std::span<const std::uint32_t> y_a,
                               std::span<const std::uint32_t> y_b);

/// Tau-b with tie correction in O(n log n). Returns 0 when either input is
/// entirely tied; throws std::invalid_argument for fewer than two elements.
double kendall_tau_b(std::span<const double> xs, std::span<const double> ys);

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> group_ranks(std::span<const double> values);

struct RankingStats {
  double kendall_tau_mean = 0.0;
  double full_match_rate = 0.0;
  double best_match_rate = 0.0;
  std::uint64_t n = 0;
  /// Instructions whose predicted or true latencies were all equal; their tau
  /// is left out of kendall_tau_mean.
  std::uint64_t tau_excluded = 0;
};

/// yhat[k] and y[k] are the predicted and true latency sequences under config
/// k, given in canonical config order (which also breaks best-config ties).
RankingStats rank_configs(const std::vector<std::span<const std::uint32_t>>& yhat,
                          const std::vector<std::span<const std::uint32_t>>& y);

void write_pairwise_csv(std::ostream& out,
                        const std::vector<std::pair<std::string, PairwiseStats>>& rows);
void write_ranking_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, RankingStats>>& rows);

}  // namespace latpred
