#include "latpred/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "latpred/rng.hpp"

namespace latpred {
namespace {

TargetConfig target_config(const ModelConfig& m) { return TargetConfig{1000, m.tau}; }

void check_fraction(double f, const char* what) {
  if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument(std::string(what) + " must be in (0, 1)");
}

// Packs windows[idx[first..first+count)] into a contiguous [B, N, 13] batch.
void gather(const std::vector<FeatureWindow>& windows, std::span<const std::size_t> idx,
            std::vector<float>& x, std::vector<float>& z, std::vector<std::uint8_t>& c) {
  const std::size_t n = windows[idx[0]].features.size();
  const std::size_t r = windows[idx[0]].targets_z.size();
  x.resize(idx.size() * n * kNumFeatures);
  z.resize(idx.size() * r);
  c.resize(idx.size() * r);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& w = windows[idx[b]];
    for (std::size_t t = 0; t < n; ++t) {
      std::copy(w.features[t].begin(), w.features[t].end(),
                x.begin() + static_cast<std::ptrdiff_t>((b * n + t) * kNumFeatures));
    }
    std::copy(w.targets_z.begin(), w.targets_z.end(), z.begin() + static_cast<std::ptrdiff_t>(b * r));
    std::copy(w.targets_c.begin(), w.targets_c.end(), c.begin() + static_cast<std::ptrdiff_t>(b * r));
  }
}

class Adam {
 public:
  Adam(const ModelParameters<float>& p, const TrainSpec& spec) : spec_(spec) {
    for (const auto& t : p.tensors()) {
      m_.emplace_back(t.numel(), 0.0f);
      v_.emplace_back(t.numel(), 0.0f);
    }
  }

  void step(ModelParameters<float>& p, const ModelParameters<float>& g, float scale, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(spec_.beta1), b2 = static_cast<float>(spec_.beta2);
    const float step = static_cast<float>(lr / bc1);
    const float inv_bc2 = static_cast<float>(1.0 / bc2);
    const float eps = static_cast<float>(spec_.eps);
    for (std::size_t i = 0; i < p.tensors().size(); ++i) {
      auto& w = p.tensors()[i].data;
      const auto& gr = g.tensors()[i].data;
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const float gk = gr[k] * scale;
        m[k] = b1 * m[k] + (1.0f - b1) * gk;
        v[k] = b2 * v[k] + (1.0f - b2) * gk * gk;
        w[k] -= step * m[k] / (std::sqrt(v[k] * inv_bc2) + eps);
      }
    }
  }

 private:
  TrainSpec spec_;
  std::vector<std::vector<float>> m_, v_;
  std::uint64_t t_ = 0;
};

double grad_norm(const ModelParameters<float>& g) {
  double sq = 0.0;
  for (const auto& t : g.tensors()) {
    for (float v : t.data) sq += static_cast<double>(v) * v;
  }
  return std::sqrt(sq);
}

}  // namespace

DatasetSplit split_dataset(std::span<const InstructionRecord> records, const TrainSpec& spec,
                           std::size_t min_records) {
  check_fraction(spec.val_fraction, "val_fraction");
  check_fraction(spec.holdout_fraction, "holdout_fraction");
  if (spec.val_fraction + spec.holdout_fraction >= 1.0) {
    throw std::invalid_argument("val_fraction + holdout_fraction must be below 1");
  }
  const std::size_t n = records.size();
  const auto hold = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.holdout_fraction));
  const auto val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.val_fraction));
  const std::size_t tr = n - hold - val;
  if (std::min({tr, val, hold}) < std::max<std::size_t>(min_records, 1)) {
    throw DataError("dataset too small: " + std::to_string(n) + " records give splits of " +
                    std::to_string(tr) + "/" + std::to_string(val) + "/" + std::to_string(hold) +
                    ", each needs at least " + std::to_string(min_records));
  }
  DatasetSplit s;
  s.train_begin = 0;
  s.val_begin = tr;
  s.holdout_begin = tr + val;
  s.train = records.subspan(0, tr);
  s.val = records.subspan(tr, val);
  s.holdout = records.subspan(tr + val, hold);
  return s;
}

TracePredictions predict_trace(const ModelParameters<float>& params,
                               std::span<const InstructionRecord> records,
                               std::size_t batch_windows) {
  const auto& mcfg = params.config();
  WindowConfig wcfg = params.window;
  wcfg.stride = wcfg.r;
  if (records.size() < wcfg.n) {
    throw DataError("trace of " + std::to_string(records.size()) +
                    " records is shorter than one window (" + std::to_string(wcfg.n) + ")");
  }
  const TargetConfig tcfg = target_config(mcfg);
  const auto windows = build_windows(records, wcfg, tcfg, &params.norm);
  TracePredictions out;
  out.first = wcfg.left_context();
  out.y_hat.reserve(windows.size() * wcfg.r);
  out.y_true.reserve(windows.size() * wcfg.r);

  ForwardCache<float> cache;
  std::vector<float> x, z;
  std::vector<std::uint8_t> c;
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  const std::size_t bw = std::max<std::size_t>(batch_windows, 1);
  for (std::size_t first = 0; first < windows.size(); first += bw) {
    const std::size_t count = std::min(bw, windows.size() - first);
    std::span<const std::size_t> idx(order.data() + first, count);
    gather(windows, idx, x, z, c);
    const auto pred = predict(params, std::span<const float>(x), count, wcfg.n, wcfg.r, cache, tcfg);
    const auto parts = loss(cache.heads, z, c, HeadMask::Teacher, mcfg.lambda_cls);
    loss_sum += parts.total * static_cast<double>(count);
    out.y_hat.insert(out.y_hat.end(), pred.y_hat.begin(), pred.y_hat.end());
    for (std::size_t b = 0; b < count; ++b) {
      const auto& w = windows[first + b];
      out.y_true.insert(out.y_true.end(), w.raw_y.begin(), w.raw_y.end());
    }
  }
  out.loss = loss_sum / static_cast<double>(windows.size());
  return out;
}

MetricsReport evaluate(const ModelParameters<float>& params,
                       std::span<const InstructionRecord> records) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto preds = predict_trace(params, records);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto m = compute_metrics(preds.y_hat, preds.y_true);
  m.val_loss = preds.loss;
  m.throughput_ips = secs > 0.0 ? static_cast<double>(m.n_eval) / secs : 0.0;
  return m;
}

TrainResult train(std::span<const InstructionRecord> records, const ModelConfig& mcfg,
                  const WindowConfig& wcfg, const TrainSpec& spec, const EpochCallback& on_epoch) {
  if (wcfg.r == 0 || wcfg.r > wcfg.n || wcfg.stride == 0) {
    throw std::invalid_argument("window: need 1 <= R <= N and stride >= 1");
  }
  if (spec.batch_windows == 0 || spec.max_epochs == 0) {
    throw std::invalid_argument("batch_windows and max_epochs must be positive");
  }
  if (!records.empty() && records.front().gt_cycles == kUnlabeled) {
    throw DataError("training requires a labeled trace");
  }
  const auto split = split_dataset(records, spec, wcfg.n);
  const TargetConfig tcfg = target_config(mcfg);

  std::vector<FeatureVector> train_feats;
  train_feats.reserve(split.train.size());
  for (const auto& r : split.train) train_feats.push_back(encode_record(r));
  const NormStats stats = fit_norm(train_feats);
  train_feats.clear();
  train_feats.shrink_to_fit();

  const auto windows = build_windows(split.train, wcfg, tcfg, &stats);

  ModelParameters<float> params = init_params<float>(mcfg, derive_seed(spec.seed, "init"));
  params.norm = stats;
  params.window = wcfg;
  ModelParameters<float> grads(mcfg);
  Adam adam(params, spec);

  TrainResult result;
  result.params = params;
  double best_mae = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  ForwardCache<float> cache;
  std::vector<float> x, z;
  std::vector<std::uint8_t> c;
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(spec.seed, "shuffle"));
  const std::uint64_t dropout_root = derive_seed(spec.seed, "dropout");
  std::uint64_t step = 0;
  const std::size_t steps_per_epoch = (order.size() + spec.batch_windows - 1) / spec.batch_windows;
  const double total_steps = static_cast<double>(steps_per_epoch * spec.max_epochs);
  const double pi = std::acos(-1.0);

  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += spec.batch_windows) {
      const std::size_t count = std::min(spec.batch_windows, order.size() - first);
      gather(windows, std::span<const std::size_t>(order.data() + first, count), x, z, c);
      ForwardOptions fo{true, splitmix64(dropout_root + step)};
      forward(params, std::span<const float>(x), count, wcfg.n, wcfg.r, cache, fo);
      const auto parts = backward(params, cache, z, c, mcfg.lambda_cls, grads);
      if (!std::isfinite(parts.total)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step));
      }
      const double norm = grad_norm(grads);
      if (!std::isfinite(norm)) {
        throw NumericalError("non-finite gradient norm at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step));
      }
      const float scale = norm > spec.grad_clip_norm && spec.grad_clip_norm > 0.0
                              ? static_cast<float>(spec.grad_clip_norm / norm)
                              : 1.0f;
      // cosine annealing from lr down to lr * lr_final_fraction
      const double progress = static_cast<double>(step) / total_steps;
      const double f = spec.lr_final_fraction;
      const double lr = spec.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(pi * progress)));
      adam.step(params, grads, scale, lr);
      loss_sum += parts.total;
      ++batches;
      ++step;
    }

    const auto val = predict_trace(params, split.val, spec.batch_windows);
    const auto vm = compute_metrics(val.y_hat, val.y_true);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), val.loss, vm.mae};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (vm.mae < best_mae) {
      best_mae = vm.mae;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= spec.patience) {
      break;
    }
  }
  return result;
}

EvalMatrix eval_matrix(const std::vector<NamedTrace>& traces, const ModelConfig& mcfg,
                       const WindowConfig& wcfg, const TrainSpec& spec,
                       const EpochCallback& on_epoch) {
  if (traces.empty()) throw std::invalid_argument("eval_matrix needs at least one trace");
  EvalMatrix m;
  std::vector<DatasetSplit> splits;
  for (const auto& t : traces) {
    m.sources.push_back(t.name);
    m.targets.push_back(t.name);
    splits.push_back(split_dataset(t.records, spec, wcfg.n));
  }
  for (const auto& src : traces) {
    const auto trained = train(src.records, mcfg, wcfg, spec, on_epoch);
    std::vector<double> row;
    for (const auto& s : splits) row.push_back(evaluate(trained.params, s.holdout).acc_round);
    m.acc_round.push_back(std::move(row));
  }
  return m;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss,val_mae\n";
  out.precision(9);
  for (const auto& h : history) {
    out << h.epoch << ',' << h.train_loss << ',' << h.val_loss << ',' << h.val_mae << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const MetricsReport& m) {
  out << "n_eval,mae,rmse,rae,rae_is_mae,acc_round,acc_pm1,acc_pm2,rel5,val_loss\n";
  out.precision(9);
  out << m.n_eval << ',' << m.mae << ',' << m.rmse << ',' << m.rae << ',' << (m.rae_is_mae ? 1 : 0)
      << ',' << m.acc_round << ',' << m.acc_pm1 << ',' << m.acc_pm2 << ',' << m.rel5 << ','
      << m.val_loss << '\n';
}

void write_matrix_csv(std::ostream& out, const EvalMatrix& m) {
  out << "train\\eval";
  for (const auto& t : m.targets) out << ',' << t;
  out << '\n';
  out.precision(9);
  for (std::size_t i = 0; i < m.sources.size(); ++i) {
    out << m.sources[i];
    for (double v : m.acc_round[i]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace latpred
