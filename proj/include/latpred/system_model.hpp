#pragma once

// Deployment sampling arithmetic and an analytic throughput model for a
// tiled LSTM inference accelerator.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace latpred {

using Rational = boost::multiprecision::cpp_rational;

/// Parses a plain decimal ("3000", "0.001", "5.916285") into an exact rational.
Rational rational_from_decimal(std::string_view text);

template <typename Num>
struct BasicDeploymentParams {
  Num epoch_len = Num(100000);
  Num engine_mips = Num(4);
  Num host_mips = Num(3000);
  Num overhead_budget = Num(1) / Num(1000);
};

template <typename Num>
struct BasicSamplingPlan {
  Num seconds_per_epoch;
  Num epoch_period_seconds;
  Num instructions_between_samples;
  Num sampling_ratio;
};

template <typename Num>
BasicSamplingPlan<Num> sampling_plan(const BasicDeploymentParams<Num>& p) {
  if (!(p.epoch_len > Num(0)) || !(p.engine_mips > Num(0)) || !(p.host_mips > Num(0))) {
    throw std::invalid_argument("deployment parameters must be positive");
  }
  if (!(p.overhead_budget > Num(0)) || p.overhead_budget > Num(1)) {
    throw std::invalid_argument("overhead_budget must be in (0, 1]");
  }
  const Num mega(1000000);
  BasicSamplingPlan<Num> plan;
  plan.seconds_per_epoch = p.epoch_len / (p.engine_mips * mega);
  plan.epoch_period_seconds = plan.seconds_per_epoch / p.overhead_budget;
  plan.instructions_between_samples = p.host_mips * mega * plan.epoch_period_seconds;
  plan.sampling_ratio = p.epoch_len / plan.instructions_between_samples;
  return plan;
}

using DeploymentParams = BasicDeploymentParams<double>;
using SamplingPlan = BasicSamplingPlan<double>;
using ExactDeploymentParams = BasicDeploymentParams<Rational>;
using ExactSamplingPlan = BasicSamplingPlan<Rational>;

struct AcceleratorSpec {
  unsigned lanes = 256;
  unsigned tiles = 1;
  double clock_hz = 330.56e6;
  double cycles_per_layer_step = 8264;
  unsigned layers = 2;
  unsigned matvec_cycles = 256;
  double batch_rows = 1;  // rows processed concurrently per tile
  double power_w = 0.028;
  double area_mm2 = 2.04;
};

/// Clock at which one tile delivers 0.02 MIPS: 0.02e6 * layers * cycles.
double reference_clock_hz(const AcceleratorSpec& shape = {});

/// Neutrino presets with 1 or 8 tiles at the reference clock, carrying the
/// reported power and area.
AcceleratorSpec neutrino_preset(unsigned tiles);

/// Million instructions per second: tiles * clock * batch_rows / (layers *
/// cycles_per_layer_step) / 1e6.
double accel_throughput(const AcceleratorSpec& spec);

/// Continuous mode keeps the accelerator always busy: ratio = engine / host.
/// Otherwise the overhead budget caps it: ratio = budget * engine / host.
double accel_sampling_ratio(const AcceleratorSpec& spec, double host_mips, bool continuous = true,
                            double overhead_budget = 1e-3);

/// (accel MIPS / accel W) / (gpu MIPS / gpu W).
double energy_efficiency_ratio(const AcceleratorSpec& accel, double gpu_mips, double gpu_power_w);

/// Fraction of a layer step spent in the four gate mat-vecs (input and
/// recurrent), reported for information only.
double mac_utilization(const AcceleratorSpec& spec);

struct ReportedAccelerator {
  unsigned tiles;
  double mips;
  double power_w;
  double area_mm2;
  double sampling_rate_denominator;
};

inline constexpr ReportedAccelerator kReportedOneTile{1, 0.02, 0.028, 2.04, 152642};
inline constexpr ReportedAccelerator kReportedEightTile{8, 0.157, 0.226, 3.15, 19080};
inline constexpr double kGpu4090Mips = 5.916285;
inline constexpr double kGpu4090InstPerSec = 5916285;

struct PlanPreset {
  std::string name;
  std::string engine_mips;  // decimal text so the exact route stays exact
  std::optional<AcceleratorSpec> accelerator;
};

std::optional<PlanPreset> plan_preset(std::string_view name);
std::vector<std::string> plan_preset_names();

}  // namespace latpred
