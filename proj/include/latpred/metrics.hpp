#pragma once

#include <cstdint>
#include <span>

namespace latpred {

/// Accuracy suite over cycle-domain predictions against clipped ground truth.
struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  /// MAE / mean(y'). When mean(y') is zero this holds the MAE and
  /// rae_is_mae is set.
  double rae = 0.0;
  bool rae_is_mae = false;
  double acc_round = 0.0;
  double acc_pm1 = 0.0;
  double acc_pm2 = 0.0;
  double rel5 = 0.0;  // |err| <= max(1, 0.05 y')
  std::uint64_t n_eval = 0;
  double throughput_ips = 0.0;
  double val_loss = 0.0;
};

/// Throws std::invalid_argument on empty or mismatched inputs. `y_true` must
/// already be clipped.
MetricsReport compute_metrics(std::span<const std::uint32_t> y_hat,
                              std::span<const std::uint32_t> y_true);

}  // namespace latpred
