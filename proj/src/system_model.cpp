#include "latpred/system_model.hpp"

#include <cctype>
#include <sstream>

namespace latpred {

Rational rational_from_decimal(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) negative = text[i++] == '-';
  boost::multiprecision::cpp_int num = 0, den = 1;
  bool digits = false, point = false;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '.' && !point) {
      point = true;
    } else if (std::isdigit(static_cast<unsigned char>(ch))) {
      num = num * 10 + (ch - '0');
      if (point) den *= 10;
      digits = true;
    } else {
      break;
    }
  }
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool eneg = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) eneg = text[i++] == '-';
    if (i == text.size()) throw std::invalid_argument("malformed number: " + std::string(text));
    unsigned exp = 0;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
      exp = exp * 10 + static_cast<unsigned>(text[i] - '0');
      if (exp > 300) throw std::invalid_argument("exponent out of range: " + std::string(text));
    }
    const boost::multiprecision::cpp_int scale = boost::multiprecision::pow(boost::multiprecision::cpp_int(10), exp);
    if (eneg) {
      den *= scale;
    } else {
      num *= scale;
    }
  }
  if (!digits || i != text.size()) throw std::invalid_argument("malformed number: " + std::string(text));
  Rational r(num, den);
  return negative ? Rational(-r) : r;
}

double reference_clock_hz(const AcceleratorSpec& shape) {
  return kReportedOneTile.mips * 1e6 * shape.layers * shape.cycles_per_layer_step / shape.batch_rows;
}

AcceleratorSpec neutrino_preset(unsigned tiles) {
  AcceleratorSpec s;
  s.tiles = tiles;
  s.clock_hz = reference_clock_hz(s);
  if (tiles == 1) {
    s.power_w = kReportedOneTile.power_w;
    s.area_mm2 = kReportedOneTile.area_mm2;
  } else if (tiles == 8) {
    s.power_w = kReportedEightTile.power_w;
    s.area_mm2 = kReportedEightTile.area_mm2;
  } else {
    throw std::invalid_argument("reported figures exist only for 1 and 8 tiles");
  }
  return s;
}

double accel_throughput(const AcceleratorSpec& spec) {
  if (spec.tiles == 0 || !(spec.clock_hz > 0) || spec.layers == 0 ||
      !(spec.cycles_per_layer_step > 0) || !(spec.batch_rows > 0)) {
    throw std::invalid_argument("accelerator spec: tiles, clock, layers, cycles and batch must be positive");
  }
  return spec.tiles * spec.clock_hz * spec.batch_rows /
         (spec.layers * spec.cycles_per_layer_step) / 1e6;
}

double accel_sampling_ratio(const AcceleratorSpec& spec, double host_mips, bool continuous,
                            double overhead_budget) {
  if (!(host_mips > 0)) throw std::invalid_argument("host_mips must be positive");
  const double engine = accel_throughput(spec);
  if (continuous) return std::min(1.0, engine / host_mips);
  DeploymentParams p;
  p.engine_mips = engine;
  p.host_mips = host_mips;
  p.overhead_budget = overhead_budget;
  return sampling_plan(p).sampling_ratio;
}

double energy_efficiency_ratio(const AcceleratorSpec& accel, double gpu_mips, double gpu_power_w) {
  if (!(gpu_mips > 0) || !(gpu_power_w > 0) || !(accel.power_w > 0)) {
    throw std::invalid_argument("efficiency inputs must be positive");
  }
  return (accel_throughput(accel) / accel.power_w) / (gpu_mips / gpu_power_w);
}

double mac_utilization(const AcceleratorSpec& spec) {
  return 2.0 * 4.0 * spec.matvec_cycles / spec.cycles_per_layer_step;
}

std::optional<PlanPreset> plan_preset(std::string_view name) {
  if (name == "gpu-4090") return PlanPreset{"gpu-4090", "5.916285", std::nullopt};
  if (name == "neutrino-1t" || name == "neutrino-8t") {
    const auto spec = neutrino_preset(name == "neutrino-1t" ? 1 : 8);
    std::ostringstream os;
    os.precision(17);
    os << accel_throughput(spec);
    return PlanPreset{std::string(name), os.str(), spec};
  }
  return std::nullopt;
}

std::vector<std::string> plan_preset_names() { return {"gpu-4090", "neutrino-1t", "neutrino-8t"}; }

}  // namespace latpred
