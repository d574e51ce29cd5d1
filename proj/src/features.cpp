#include "latpred/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latpred {

FeatureVector encode_record(const InstructionRecord& r) {
  const auto pc = addr_split(r.pc);
  const auto mem = r.has_mem() ? addr_split(r.mem_addr) : AddrParts{};
  auto f = [](std::uint64_t v) { return static_cast<float>(v); };
  return {f(pc.hi),
          f(pc.mid),
          f(pc.lo),
          f(mem.hi),
          f(mem.mid),
          f(mem.lo),
          f(static_cast<std::uint64_t>(r.opclass)),
          f(static_cast<std::uint64_t>(r.dst.reg_class)),
          f(r.dst.index),
          f(static_cast<std::uint64_t>(r.src1.reg_class)),
          f(r.src1.index),
          f(static_cast<std::uint64_t>(r.src2.reg_class)),
          f(r.src2.index)};
}

NormStats fit_norm(std::span<const FeatureVector> train) {
  if (train.empty()) throw std::invalid_argument("fit_norm: empty training set");
  NormStats s;
  const double n = static_cast<double>(train.size());
  for (const auto& v : train) {
    for (std::size_t k = 0; k < kNumFeatures; ++k) s.mean[k] += v[k];
  }
  for (auto& m : s.mean) m /= n;
  for (const auto& v : train) {
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      const double d = v[k] - s.mean[k];
      s.stddev[k] += d * d;
    }
  }
  for (auto& sd : s.stddev) sd = std::max(std::sqrt(sd / n), NormStats::kMinStd);
  return s;
}

FeatureVector apply_norm(const NormStats& stats, const FeatureVector& v) {
  FeatureVector out;
  for (std::size_t k = 0; k < kNumFeatures; ++k) {
    out[k] = static_cast<float>((v[k] - stats.mean[k]) / stats.stddev[k]);
  }
  return out;
}

Target transform_target(std::uint32_t y, const TargetConfig& cfg) {
  const std::uint32_t clipped = std::min(y, cfg.clip);
  return {std::log1p(static_cast<double>(clipped)), static_cast<std::uint8_t>(y > cfg.tau)};
}

std::uint32_t invert_target(double z, const TargetConfig& cfg) {
  if (!std::isfinite(z)) return z > 0 ? cfg.clip : 0;
  const double y = std::round(std::expm1(std::min(z, 40.0)));
  if (y <= 0.0) return 0;
  return y >= cfg.clip ? cfg.clip : static_cast<std::uint32_t>(y);
}

std::vector<std::size_t> window_starts(std::size_t num_records, const WindowConfig& w) {
  if (w.r == 0 || w.r > w.n) throw std::invalid_argument("window: need 1 <= R <= N");
  if (w.stride == 0) throw std::invalid_argument("window: stride must be >= 1");
  if (num_records < w.n) throw std::invalid_argument("window: trace shorter than N");
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + w.n <= num_records; s += w.stride) starts.push_back(s);
  return starts;
}

std::vector<FeatureWindow> build_windows(std::span<const InstructionRecord> records,
                                         const WindowConfig& w, const TargetConfig& tcfg,
                                         const NormStats* stats) {
  const auto starts = window_starts(records.size(), w);
  const std::size_t s = w.left_context();
  std::vector<FeatureWindow> out;
  out.reserve(starts.size());
  for (const auto start : starts) {
    FeatureWindow win;
    win.start = start;
    win.features.reserve(w.n);
    for (std::size_t k = 0; k < w.n; ++k) {
      const auto v = encode_record(records[start + k]);
      win.features.push_back(stats ? apply_norm(*stats, v) : v);
    }
    for (std::size_t k = 0; k < w.r; ++k) {
      const auto y = records[start + s + k].gt_cycles;
      const auto t = transform_target(y, tcfg);
      win.targets_z.push_back(static_cast<float>(t.z));
      win.targets_c.push_back(t.c);
      win.raw_y.push_back(std::min(y, tcfg.clip));
    }
    out.push_back(std::move(win));
  }
  return out;
}

}  // namespace latpred
