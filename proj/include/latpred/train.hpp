#pragma once

// Training loop with early stopping on validation MAE, evaluation, and the
// cross-workload evaluation matrix.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "latpred/features.hpp"
#include "latpred/metrics.hpp"
#include "latpred/model.hpp"

namespace latpred {

/// Raised when the loss or gradients stop being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a dataset cannot support the requested split or windowing.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainSpec {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_windows = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double val_fraction = 0.1;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
  double grad_clip_norm = 5.0;
  /// 1.0 keeps lr constant; smaller values anneal it along a cosine to lr * fraction.
  double lr_final_fraction = 1.0;
};

struct DatasetSplit {
  std::span<const InstructionRecord> train, val, holdout;
  std::size_t train_begin = 0, val_begin = 0, holdout_begin = 0;
};

/// Contiguous segments [train | val | holdout]; val and holdout sizes are
/// floor(n * fraction). Throws DataError when any split is shorter than
/// `min_records`.
DatasetSplit split_dataset(std::span<const InstructionRecord> records, const TrainSpec& spec,
                           std::size_t min_records = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;
};

struct TrainResult {
  ModelParameters<float> params;  // best-validation weights, with norm + window
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(std::span<const InstructionRecord> records, const ModelConfig& mcfg,
                  const WindowConfig& wcfg, const TrainSpec& spec,
                  const EpochCallback& on_epoch = {});

/// Predictions for the target positions covered by stride-R windows over a
/// trace: positions [first, first + y_hat.size()).
struct TracePredictions {
  std::size_t first = 0;
  std::vector<std::uint32_t> y_hat;
  std::vector<std::uint32_t> y_true;  // clipped
  double loss = 0.0;                  // mean joint loss, teacher-masked
};

TracePredictions predict_trace(const ModelParameters<float>& params,
                               std::span<const InstructionRecord> records,
                               std::size_t batch_windows = 64);

MetricsReport evaluate(const ModelParameters<float>& params,
                       std::span<const InstructionRecord> records);

struct NamedTrace {
  std::string name;
  std::vector<InstructionRecord> records;
};

struct EvalMatrix {
  std::vector<std::string> sources, targets;
  std::vector<std::vector<double>> acc_round;  // [source][target]
};

/// One model per source trained on its train/val splits, scored on every
/// target's holdout split.
EvalMatrix eval_matrix(const std::vector<NamedTrace>& traces, const ModelConfig& mcfg,
                       const WindowConfig& wcfg, const TrainSpec& spec,
                       const EpochCallback& on_epoch = {});

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);
/// throughput_ips is deliberately not written so reports stay byte-stable.
void write_metrics_csv(std::ostream& out, const MetricsReport& m);
void write_matrix_csv(std::ostream& out, const EvalMatrix& m);

}  // namespace latpred
