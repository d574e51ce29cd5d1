#include "latpred/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "latpred/rng.hpp"

namespace latpred {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_f64(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

Rational to_rational(const std::string& key, const std::string& v) {
  try {
    return rational_from_decimal(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError(key + ": expected a decimal number, got '" + v + "'");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

struct Entry {
  ConfigKey doc;
  Setter set;
};

std::vector<Entry> registry() {
  const RunConfig d;
  std::vector<Entry> r;
  auto add = [&](std::string key, std::string def, std::string help, Setter s) {
    r.push_back({{std::move(key), std::move(def), std::move(help)}, std::move(s)});
  };
  add("seed", std::to_string(d.seed), "root seed; stage seeds are split from it",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); });

  add("workload.kind", to_string(d.workload.kind),
      "loop_alu | pointer_chase | streaming | branchy | mixed",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        auto kind = workload_kind_from_string(v);
        if (!kind) throw ConfigError(k + ": unknown workload kind '" + v + "'");
        c.workload.kind = *kind;
      });
  add("workload.count", std::to_string(d.workload.instruction_count), "instructions to generate",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        c.workload.instruction_count = to_u64(k, v);
        if (c.workload.instruction_count == 0) throw ConfigError(k + " must be at least 1");
      });
  add("workload.footprint_bytes", std::to_string(d.workload.footprint_bytes),
      "data working-set size in bytes",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        c.workload.footprint_bytes = to_u64(k, v);
        if (c.workload.footprint_bytes < 64) throw ConfigError(k + " must be at least 64");
      });

  add("sim.preset", d.sim.name, "starting point for sim.*: 4w+mem | 8w | rob | lsq | 6w+ls",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        auto p = config_preset(v);
        if (!p) throw ConfigError(k + ": unknown preset '" + v + "'");
        c.sim = *p;
      });
  add("sim.warm_caches", d.sim_options.warm_caches ? "true" : "false",
      "replay the trace through the caches before timing",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        c.sim_options.warm_caches = to_bool(k, v);
      });
  for (const auto& [key, value] : parse_kv_text(format_microarch(d.sim))) {
    add("sim." + key, value, "microarchitecture parameter",
        [key](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.sim = parse_microarch({{key, v}}, c.sim);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(k + ": " + e.what());
          }
        });
  }

  add("window.n", std::to_string(d.window.n), "window length N",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.window.n = to_u64(k, v); });
  add("window.r", std::to_string(d.window.r), "centered target segment length R",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.window.r = to_u64(k, v); });
  add("window.stride", std::to_string(d.window.stride), "training window stride",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.window.stride = to_u64(k, v); });
  add("target.tau", std::to_string(d.target.tau), "regime threshold: class 1 iff y > tau",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        c.target.tau = static_cast<std::uint32_t>(to_u64(k, v));
        c.model.tau = c.target.tau;
      });
  add("target.clip", std::to_string(d.target.clip), "latency cap (fixed at 1000)",
      [](RunConfig&, const std::string& k, const std::string& v) {
        if (to_u64(k, v) != 1000) throw ConfigError(k + ": only 1000 is supported");
      });

  add("model.proj_dim", std::to_string(d.model.proj_dim), "input projection width",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.model.proj_dim = to_u64(k, v); });
  add("model.hidden", std::to_string(d.model.hidden), "LSTM hidden size per direction",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.model.hidden = to_u64(k, v); });
  add("model.layers", std::to_string(d.model.layers), "LSTM depth (1-3)",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.model.layers = to_u64(k, v); });
  add("model.bidirectional", d.model.bidirectional ? "true" : "false", "bidirectional LSTM",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.model.bidirectional = to_bool(k, v); });
  add("model.cls_hidden", std::to_string(d.model.cls_hidden), "classifier hidden width",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.model.cls_hidden = to_u64(k, v); });
  add("model.dropout_p", fmt(d.model.dropout_p), "dropout on each LSTM layer's outputs",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.model.dropout_p = to_f64(k, v); });

  add("train.lambda_cls", fmt(d.model.lambda_cls), "classifier loss weight",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.model.lambda_cls = to_f64(k, v); });
  add("train.lr", fmt(d.train.lr), "Adam learning rate",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = to_f64(k, v); });
  add("train.beta1", fmt(d.train.beta1), "Adam beta1",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.beta1 = to_f64(k, v); });
  add("train.beta2", fmt(d.train.beta2), "Adam beta2",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.beta2 = to_f64(k, v); });
  add("train.eps", fmt(d.train.eps), "Adam epsilon",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.eps = to_f64(k, v); });
  add("train.batch_windows", std::to_string(d.train.batch_windows), "windows per optimizer step",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_windows = to_u64(k, v); });
  add("train.max_epochs", std::to_string(d.train.max_epochs), "epoch limit",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.max_epochs = to_u64(k, v); });
  add("train.patience", std::to_string(d.train.patience), "epochs without val-MAE improvement before stopping",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.patience = to_u64(k, v); });
  add("train.val_fraction", fmt(d.train.val_fraction), "validation share (contiguous, before holdout)",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.val_fraction = to_f64(k, v); });
  add("train.holdout_fraction", fmt(d.train.holdout_fraction), "holdout share (trace tail, never trained)",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.holdout_fraction = to_f64(k, v); });
  add("train.grad_clip_norm", fmt(d.train.grad_clip_norm), "global gradient-norm clip (0 disables)",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.train.grad_clip_norm = to_f64(k, v); });
  add("train.lr_final_fraction", fmt(d.train.lr_final_fraction),
      "cosine-anneal lr to lr * fraction over max_epochs (1 = constant)",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        c.train.lr_final_fraction = to_f64(k, v);
        if (!(c.train.lr_final_fraction >= 0.0 && c.train.lr_final_fraction <= 1.0)) {
          throw ConfigError(k + " must be in [0, 1]");
        }
      });
  add("train.fp16_checkpoint", d.fp16_checkpoint ? "true" : "false", "store checkpoint weights as f16",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.fp16_checkpoint = to_bool(k, v); });

  add("deploy.epoch_len", "100000", "instructions per epoch",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.deploy.epoch_len = to_rational(k, v); });
  add("deploy.engine_mips", "4", "inference throughput in MIPS",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.deploy.engine_mips = to_rational(k, v); });
  add("deploy.host_mips", "3000", "host execution rate in MIPS",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.deploy.host_mips = to_rational(k, v); });
  add("deploy.overhead_budget", "0.001", "allowed inference overhead fraction",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.deploy.overhead_budget = to_rational(k, v); });
  add("deploy.preset", "", "extra plan row: gpu-4090 | neutrino-1t | neutrino-8t",
      [](RunConfig& c, const std::string& k, const std::string& v) {
        if (!v.empty() && !plan_preset(v)) throw ConfigError(k + ": unknown preset '" + v + "'");
        c.deploy_preset = v;
      });
  add("deploy.gpu_power_w", "0", "GPU board power for the efficiency ratio (0 omits it)",
      [](RunConfig& c, const std::string& k, const std::string& v) { c.gpu_power_w = to_f64(k, v); });

  add("paths.out", d.out_dir, "output directory",
      [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; });
  return r;
}

}  // namespace

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> keys;
  for (const auto& e : registry()) keys.push_back(e.doc);
  return keys;
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
    }
  }
  return kv;
}

RunConfig apply_config(const std::map<std::string, std::string>& kv, RunConfig base) {
  const auto reg = registry();
  std::map<std::string, const Entry*> by_key;
  for (const auto& e : reg) by_key[e.doc.key] = &e;
  for (const auto& [k, v] : kv) {
    if (!by_key.count(k)) throw ConfigError("unknown config key: " + k);
  }
  if (auto it = kv.find("sim.preset"); it != kv.end()) by_key["sim.preset"]->set(base, it->first, it->second);
  for (const auto& [k, v] : kv) {
    if (k != "sim.preset") by_key[k]->set(base, k, v);
  }
  if (auto why = base.model.invariant_violation(); !why.empty()) throw ConfigError("model: " + why);
  if (base.window.r == 0 || base.window.r > base.window.n || base.window.stride == 0) {
    throw ConfigError("window: need 1 <= r <= n and stride >= 1");
  }
  const auto& d = base.deploy;
  if (d.epoch_len <= 0 || d.engine_mips <= 0 || d.host_mips <= 0) {
    throw ConfigError("deploy: epoch_len, engine_mips and host_mips must be positive");
  }
  if (d.overhead_budget <= 0 || d.overhead_budget > 1) {
    throw ConfigError("deploy.overhead_budget must be in (0, 1]");
  }
  const auto seeds = stage_seeds(base.seed);
  base.workload.seed = seeds.workload;
  base.train.seed = seeds.train;
  return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return apply_config(parse_kv_text(ss.str()), std::move(base));
}

StageSeeds stage_seeds(std::uint64_t root) {
  return {derive_seed(root, "workload"), derive_seed(root, "train")};
}

}  // namespace latpred
