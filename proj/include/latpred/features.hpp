#pragma once

// Microarchitecture-independent instruction features, normalization, centered
// sliding windows, and the latency target transforms.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "latpred/trace.hpp"

namespace latpred {

inline constexpr std::size_t kNumFeatures = 13;

/// pc_hi, pc_mid, pc_lo, mem_hi, mem_mid, mem_lo, opclass,
/// dst_class, dst_index, src1_class, src1_index, src2_class, src2_index.
using FeatureVector = std::array<float, kNumFeatures>;

struct AddrParts {
  std::uint64_t hi = 0;   // a / 2^42
  std::uint64_t mid = 0;  // (a mod 2^42) / 2^20
  std::uint64_t lo = 0;   // a mod 2^20

  friend bool operator==(const AddrParts&, const AddrParts&) = default;
};

constexpr AddrParts addr_split(std::uint64_t a) {
  return {a >> 42, (a & ((std::uint64_t{1} << 42) - 1)) >> 20, a & ((std::uint64_t{1} << 20) - 1)};
}

FeatureVector encode_record(const InstructionRecord& r);

struct NormStats {
  static constexpr double kMinStd = 1e-6;
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> stddev{};
};

NormStats fit_norm(std::span<const FeatureVector> train);
FeatureVector apply_norm(const NormStats& stats, const FeatureVector& v);

struct TargetConfig {
  std::uint32_t clip = 1000;
  std::uint32_t tau = 10;
};

struct Target {
  double z = 0.0;
  std::uint8_t c = 0;
};

Target transform_target(std::uint32_t y, const TargetConfig& cfg = {});
std::uint32_t invert_target(double z, const TargetConfig& cfg = {});

struct WindowConfig {
  std::size_t n = 576;
  std::size_t r = 192;
  std::size_t stride = 192;

  /// Left context length floor((N - R) / 2).
  [[nodiscard]] std::size_t left_context() const { return (n - r) / 2; }
};

struct FeatureWindow {
  std::size_t start = 0;  // index of the window's first record
  std::vector<FeatureVector> features;  // N rows, normalized when stats were given
  std::vector<float> targets_z;         // R
  std::vector<std::uint8_t> targets_c;  // R
  std::vector<std::uint32_t> raw_y;     // R, clipped
};

/// Windows at offsets 0, stride, 2*stride, ...; targets are positions
/// [s, s + R) of each window (0-based). Features are normalized with `stats`
/// when non-null.
std::vector<FeatureWindow> build_windows(std::span<const InstructionRecord> records,
                                         const WindowConfig& wcfg,
                                         const TargetConfig& tcfg = {},
                                         const NormStats* stats = nullptr);

/// Window start offsets only, for callers that stream windows themselves.
std::vector<std::size_t> window_starts(std::size_t num_records, const WindowConfig& wcfg);

}  // namespace latpred
