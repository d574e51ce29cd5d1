#include "latpred/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace latpred {

MetricsReport compute_metrics(std::span<const std::uint32_t> y_hat,
                              std::span<const std::uint32_t> y_true) {
  if (y_hat.size() != y_true.size()) throw std::invalid_argument("metrics: length mismatch");
  if (y_hat.empty()) throw std::invalid_argument("metrics: empty evaluation set");
  double abs_sum = 0.0, sq_sum = 0.0, y_sum = 0.0;
  std::uint64_t exact = 0, pm1 = 0, pm2 = 0, rel = 0;
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    const double y = y_true[i];
    const double err = std::abs(static_cast<double>(y_hat[i]) - y);
    abs_sum += err;
    sq_sum += err * err;
    y_sum += y;
    exact += err == 0.0;
    pm1 += err <= 1.0;
    pm2 += err <= 2.0;
    rel += err <= std::max(1.0, 0.05 * y);
  }
  const double n = static_cast<double>(y_hat.size());
  MetricsReport m;
  m.n_eval = y_hat.size();
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  if (y_sum > 0.0) {
    m.rae = m.mae / (y_sum / n);
  } else {
    m.rae = m.mae;
    m.rae_is_mae = true;
  }
  m.acc_round = static_cast<double>(exact) / n;
  m.acc_pm1 = static_cast<double>(pm1) / n;
  m.acc_pm2 = static_cast<double>(pm2) / n;
  m.rel5 = static_cast<double>(rel) / n;
  return m;
}

}  // namespace latpred
