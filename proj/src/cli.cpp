#include "latpred/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "latpred/checkpoint.hpp"
#include "latpred/downstream.hpp"
#include "latpred/run_config.hpp"
#include "latpred/sim.hpp"
#include "latpred/system_model.hpp"
#include "latpred/train.hpp"

namespace latpred {
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool force = false;
  std::vector<std::string> sets;
};

RunConfig resolve_config(const Globals& g) {
  std::map<std::string, std::string> kv;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw ConfigError("cannot open config " + g.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    kv = parse_kv_text(ss.str());
  }
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    auto key = s.substr(0, eq);
    auto value = s.substr(eq + 1);
    key.erase(key.find_last_not_of(' ') + 1);
    value.erase(0, value.find_first_not_of(' '));
    kv[key] = value;
  }
  if (g.seed_set) kv["seed"] = std::to_string(g.seed);
  if (!g.out_dir.empty()) kv["paths.out"] = g.out_dir;
  return apply_config(kv);
}

class Outputs {
 public:
  Outputs(std::string dir, bool force) : dir_(std::move(dir)), force_(force) {}

  fs::path path(const std::string& name) const { return fs::path(dir_) / name; }

  // Fails before anything is written if any target exists and --force is off.
  void claim(const std::vector<std::string>& names) const {
    for (const auto& n : names) {
      if (!force_ && fs::exists(path(n))) {
        throw UsageError("refusing to overwrite " + path(n).string() + " (use --force)");
      }
    }
    fs::create_directories(dir_);
  }

  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream f(path(name), std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path(name).string());
  }

 private:
  std::string dir_;
  bool force_;
};

std::string stem(const std::string& p) { return fs::path(p).stem().string(); }

MicroarchConfig resolve_uarch(const std::string& spec, const MicroarchConfig& fallback) {
  if (spec.empty()) return fallback;
  if (auto p = config_preset(spec)) return *p;
  std::ifstream in(spec);
  if (!in) throw ConfigError("unknown microarch preset or file: " + spec);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_microarch(parse_kv_text(ss.str()), fallback);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(spec + ": " + e.what());
  }
}

std::vector<InstructionRecord> read_labeled(const std::string& path) {
  auto t = read_trace_file(path);
  if (!t.labeled) throw TraceError(path + " is not a labeled trace");
  return std::move(t.records);
}

std::string fmt_exact(const Rational& r) {
  std::ostringstream os;
  if (denominator(r) == 1) {
    os << numerator(r);
  } else {
    os << std::setprecision(12) << static_cast<double>(r);
  }
  return os.str();
}

void print_plan_row(std::ostream& out, const std::string& label, const ExactDeploymentParams& p) {
  const auto plan = sampling_plan(p);
  const Rational inv = Rational(1) / plan.sampling_ratio;
  out << label << ',' << fmt_exact(p.epoch_len) << ',' << fmt_exact(p.engine_mips) << ','
      << fmt_exact(p.host_mips) << ',' << fmt_exact(p.overhead_budget) << ','
      << fmt_exact(plan.seconds_per_epoch) << ',' << fmt_exact(plan.epoch_period_seconds) << ','
      << fmt_exact(plan.instructions_between_samples) << ",1/" << fmt_exact(inv) << '\n';
}

std::string config_help() {
  std::ostringstream os;
  os << "Config keys (file given by --config, or --set key=value):\n";
  for (const auto& k : config_keys()) {
    os << "  " << std::left << std::setw(28) << k.key << " = " << std::setw(12)
       << (k.default_value.empty() ? "\"\"" : k.default_value) << "  " << k.help << '\n';
  }
  os << "\nExit codes: 0 ok, 2 bad arguments/config, 3 data error, 4 numerical failure.\n";
  return os.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instruction latency prediction toolkit", "latpred"};
  app.footer(config_help());
  app.require_subcommand(1);
  Globals g;
  auto add_globals = [&g](CLI::App* sub) {
    sub->add_option("--config", g.config_path, "config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", g.seed, "root seed (overrides the config)")
        ->each([&g](const std::string&) { g.seed_set = true; });
    sub->add_option("--out", g.out_dir, "output directory (overrides paths.out)");
    sub->add_flag("--force", g.force, "overwrite existing outputs");
    sub->add_option("--set", g.sets, "config override key=value (repeatable)");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic workload trace -> trace.nstr");
  add_globals(gen);
  std::string gen_kind;
  gen->add_option("--kind", gen_kind, "workload kind (overrides workload.kind)");

  auto* sim = app.add_subcommand("simulate", "label a trace with the teacher simulator");
  add_globals(sim);
  std::string sim_trace, sim_uarch, sim_name;
  sim->add_option("trace", sim_trace, "unlabeled trace")->required()->check(CLI::ExistingFile);
  sim->add_option("--uarch", sim_uarch, "preset name or microarch file (default: sim.* keys)");
  sim->add_option("--name", sim_name, "output file is labeled_<name>.nstr (default: config name)");

  auto* trn = app.add_subcommand("train", "train a model -> model.ckpt, history.csv");
  add_globals(trn);
  std::string train_trace;
  trn->add_option("trace", train_trace, "labeled trace")->required()->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint -> metrics.csv, gt_histogram.csv");
  add_globals(ev);
  std::string ev_ckpt, ev_trace, ev_split = "holdout";
  ev->add_option("checkpoint", ev_ckpt)->required()->check(CLI::ExistingFile);
  ev->add_option("trace", ev_trace, "labeled trace")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", ev_split, "holdout | all")->check(CLI::IsMember({"holdout", "all"}));

  auto* mat = app.add_subcommand("matrix", "cross-workload accuracy matrix -> matrix.csv");
  add_globals(mat);
  std::string mat_dir;
  mat->add_option("trace_dir", mat_dir, "directory of labeled *.nstr traces")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* rnk = app.add_subcommand("rank", "pairwise and ranking analysis -> pairwise.csv, ranking.csv");
  add_globals(rnk);
  std::vector<std::string> rk_ckpts, rk_traces;
  std::string rk_name = "workload";
  rnk->add_option("--ckpt", rk_ckpts, "checkpoint per config, canonical order")->required();
  rnk->add_option("--trace", rk_traces, "labeled trace per config, same order")->required();
  rnk->add_option("--name", rk_name, "benchmark name for ranking.csv");

  auto* pln = app.add_subcommand("plan", "print the sampling plan table");
  add_globals(pln);
  std::string plan_name;
  pln->add_option("--preset", plan_name, "gpu-4090 | neutrino-1t | neutrino-8t");

  auto* sgn = app.add_subcommand("sign", "print one SHA-256 signature per epoch");
  add_globals(sgn);
  std::string sign_trace;
  std::size_t sign_epoch = 0;
  sgn->add_option("trace", sign_trace)->required()->check(CLI::ExistingFile);
  sgn->add_option("--epoch-len", sign_epoch, "epoch length (default: from the trace header)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadArgs;
  }

  auto progress = [&err](const EpochRecord& r) {
    err << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_loss " << r.val_loss
        << " val_mae " << r.val_mae << '\n';
  };

  try {
    if (!gen_kind.empty()) g.sets.push_back("workload.kind=" + gen_kind);
    const RunConfig cfg = resolve_config(g);
    const Outputs outs(cfg.out_dir, g.force);

    if (*gen) {
      outs.claim({"trace.nstr"});
      const auto recs = gen_workload(cfg.workload);
      write_trace_file(outs.path("trace.nstr").string(), Trace{false, 100000, recs});
      err << "wrote " << recs.size() << " records to " << outs.path("trace.nstr").string() << '\n';
    } else if (*sim) {
      const auto uarch = resolve_uarch(sim_uarch, cfg.sim);
      const std::string name = "labeled_" + (sim_name.empty() ? uarch.name : sim_name) + ".nstr";
      outs.claim({name});
      auto t = read_trace_file(sim_trace);
      const auto labeled = simulate(t.records, uarch, cfg.sim_options);
      write_trace_file(outs.path(name).string(), Trace{true, t.epoch_len, labeled});
      err << "wrote " << labeled.size() << " labeled records to " << outs.path(name).string() << '\n';
    } else if (*trn) {
      outs.claim({"model.ckpt", "history.csv"});
      const auto recs = read_labeled(train_trace);
      const auto res = train(recs, cfg.model, cfg.window, cfg.train, progress);
      save_checkpoint_file(res.params, outs.path("model.ckpt").string(),
                           cfg.fp16_checkpoint ? BlobDtype::F16 : BlobDtype::F32);
      std::ostringstream hist;
      write_history_csv(hist, res.history);
      outs.write_text("history.csv", hist.str());
      err << "best epoch " << res.best_epoch << '\n';
    } else if (*ev) {
      outs.claim({"metrics.csv", "gt_histogram.csv"});
      const auto params = load_checkpoint_file(ev_ckpt);
      const auto recs = read_labeled(ev_trace);
      std::span<const InstructionRecord> part(recs);
      if (ev_split == "holdout") part = split_dataset(recs, cfg.train, params.window.n).holdout;
      const auto m = evaluate(params, part);
      std::ostringstream mcsv, hcsv;
      write_metrics_csv(mcsv, m);
      outs.write_text("metrics.csv", mcsv.str());
      const auto h = gt_histogram(part);
      hcsv << "bin,fraction\n";
      hcsv.precision(9);
      for (std::size_t k = 0; k < GtHistogram::kBins; ++k) {
        hcsv << (k + 1 < GtHistogram::kBins ? std::to_string(k) : std::string(">10")) << ','
             << h.bins[k] << '\n';
      }
      outs.write_text("gt_histogram.csv", hcsv.str());
      out << mcsv.str();
      err << "throughput " << m.throughput_ips << " instr/s\n";
    } else if (*mat) {
      outs.claim({"matrix.csv"});
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(mat_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".nstr") files.push_back(e.path().string());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw DataError("no .nstr traces in " + mat_dir);
      std::vector<NamedTrace> traces;
      for (const auto& f : files) traces.push_back({stem(f), read_labeled(f)});
      const auto m = eval_matrix(traces, cfg.model, cfg.window, cfg.train, progress);
      std::ostringstream csv;
      write_matrix_csv(csv, m);
      outs.write_text("matrix.csv", csv.str());
      out << csv.str();
    } else if (*rnk) {
      if (rk_ckpts.size() != rk_traces.size() || rk_ckpts.size() < 2) {
        throw UsageError("rank needs the same number (>= 2) of --ckpt and --trace arguments");
      }
      outs.claim({"pairwise.csv", "ranking.csv"});
      std::vector<TracePredictions> preds;
      std::vector<std::string> names;
      std::vector<std::vector<InstructionRecord>> traces;
      for (std::size_t k = 0; k < rk_ckpts.size(); ++k) {
        traces.push_back(read_labeled(rk_traces[k]));
        if (traces[k].size() != traces[0].size() ||
            !std::equal(traces[k].begin(), traces[k].end(), traces[0].begin(),
                        [](const auto& a, const auto& b) { return a.pc == b.pc; })) {
          throw DataError(rk_traces[k] + " does not retire the same instruction stream as " + rk_traces[0]);
        }
        const auto params = load_checkpoint_file(rk_ckpts[k]);
        const auto hold = split_dataset(traces[k], cfg.train, params.window.n).holdout;
        preds.push_back(predict_trace(params, hold));
        if (preds[k].y_hat.size() != preds[0].y_hat.size()) {
          throw DataError("checkpoints disagree on window geometry");
        }
        auto n = stem(rk_traces[k]);
        if (n.starts_with("labeled_")) n = n.substr(8);
        names.push_back(n);
      }
      std::vector<std::pair<std::string, PairwiseStats>> rows;
      for (std::size_t a = 0; a < preds.size(); ++a) {
        for (std::size_t b = a + 1; b < preds.size(); ++b) {
          rows.emplace_back(names[a] + " <= " + names[b],
                            pairwise_compare(preds[a].y_hat, preds[b].y_hat, preds[a].y_true,
                                             preds[b].y_true));
        }
      }
      std::vector<std::span<const std::uint32_t>> yh, yt;
      for (const auto& p : preds) {
        yh.emplace_back(p.y_hat);
        yt.emplace_back(p.y_true);
      }
      const auto rs = rank_configs(yh, yt);
      std::ostringstream pcsv, rcsv;
      write_pairwise_csv(pcsv, rows);
      write_ranking_csv(rcsv, {{rk_name, rs}});
      outs.write_text("pairwise.csv", pcsv.str());
      outs.write_text("ranking.csv", rcsv.str());
      out << pcsv.str() << rcsv.str();
    } else if (*pln) {
      const std::string preset = plan_name.empty() ? cfg.deploy_preset : plan_name;
      out << "row,epoch_len,engine_mips,host_mips,overhead_budget,seconds_per_epoch,"
             "epoch_period_s,instructions_between_samples,sampling_ratio\n";
      print_plan_row(out, "configured", cfg.deploy);
      if (!preset.empty()) {
        const auto p = plan_preset(preset);
        if (!p) throw UsageError("unknown preset " + preset);
        ExactDeploymentParams d = cfg.deploy;
        d.engine_mips = rational_from_decimal(p->engine_mips);
        print_plan_row(out, p->name, d);
        if (p->accelerator) {
          const auto& a = *p->accelerator;
          const double host = static_cast<double>(cfg.deploy.host_mips);
          out << "\naccelerator,tiles,clock_mhz,mips,continuous_ratio,power_w,area_mm2";
          if (cfg.gpu_power_w > 0) out << ",efficiency_vs_gpu";
          out << '\n'
              << p->name << ',' << a.tiles << ',' << a.clock_hz / 1e6 << ',' << accel_throughput(a)
              << ",1/" << std::setprecision(8) << 1.0 / accel_sampling_ratio(a, host) << ','
              << a.power_w << ',' << a.area_mm2;
          if (cfg.gpu_power_w > 0) out << ',' << energy_efficiency_ratio(a, kGpu4090Mips, cfg.gpu_power_w);
          out << '\n';
        }
      }
    } else if (*sgn) {
      const auto t = read_trace_file(sign_trace);
      const std::size_t len = sign_epoch ? sign_epoch : t.epoch_len;
      for (const auto& e : epoch_slice(t.records, len)) out << to_hex(epoch_signature(e)) << '\n';
    }
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const TraceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadArgs;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadArgs;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadArgs;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
}

}  // namespace latpred
