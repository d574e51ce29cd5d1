#include "latpred/sim.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <stdexcept>

namespace latpred {

std::string MicroarchConfig::invariant_violation() const {
  if (width == 0 || ls_units == 0 || lsq_entries == 0 || num_phys_regs == 0 || rob_size == 0 ||
      l1d_kib == 0 || l1i_kib == 0 || l2_mib == 0) {
    return "all counts must be >= 1";
  }
  if (rob_size < width) return "rob_size must be >= width";
  if (lsq_entries < ls_units) return "lsq_entries must be >= ls_units";
  if (num_phys_regs <= arch_regs) return "num_phys_regs must exceed arch_regs";
  if (cache_ways == 0 || line_bytes == 0) return "cache geometry must be positive";
  if (predictor_entries == 0) return "predictor_entries must be >= 1";
  return {};
}

std::vector<MicroarchConfig> default_configs() {
  MicroarchConfig base;  // 8w
  MicroarchConfig four_mem = base;
  four_mem.name = "4w+mem";
  four_mem.width = 4;
  four_mem.ls_units = 2;
  four_mem.l1d_kib = 128;
  MicroarchConfig rob = base;
  rob.name = "rob";
  rob.rob_size = 384;
  rob.num_phys_regs = 512;
  MicroarchConfig lsq = base;
  lsq.name = "lsq";
  lsq.ls_units = 2;
  lsq.lsq_entries = 64;
  MicroarchConfig six_ls = base;
  six_ls.name = "6w+ls";
  six_ls.width = 6;
  six_ls.ls_units = 2;
  return {four_mem, base, rob, lsq, six_ls};
}

std::optional<MicroarchConfig> config_preset(const std::string& name) {
  for (auto& c : default_configs()) {
    if (c.name == name) return c;
  }
  return std::nullopt;
}

namespace {

std::uint32_t parse_u32(const std::string& key, const std::string& v) {
  std::uint32_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument("config key " + key + ": expected unsigned integer, got '" + v + "'");
  }
  return out;
}

}  // namespace

std::string format_microarch(const MicroarchConfig& c) {
  std::ostringstream os;
  os << "name = " << c.name << "\n"
     << "width = " << c.width << "\n"
     << "ls_units = " << c.ls_units << "\n"
     << "lsq_entries = " << c.lsq_entries << "\n"
     << "num_phys_regs = " << c.num_phys_regs << "\n"
     << "rob_size = " << c.rob_size << "\n"
     << "l1d_kib = " << c.l1d_kib << "\n"
     << "l1i_kib = " << c.l1i_kib << "\n"
     << "l2_mib = " << c.l2_mib << "\n"
     << "l1_hit_cycles = " << c.l1_hit_cycles << "\n"
     << "l2_hit_cycles = " << c.l2_hit_cycles << "\n"
     << "dram_cycles = " << c.dram_cycles << "\n"
     << "cache_ways = " << c.cache_ways << "\n"
     << "line_bytes = " << c.line_bytes << "\n"
     << "mispredict_penalty = " << c.mispredict_penalty << "\n"
     << "predictor_entries = " << c.predictor_entries << "\n"
     << "arch_regs = " << c.arch_regs << "\n";
  for (std::size_t i = 0; i < kNumOpClasses; ++i) {
    os << "lat." << opclass_name(static_cast<OpClass>(i)) << " = " << c.op_latency[i] << "\n";
  }
  return os.str();
}

MicroarchConfig parse_microarch(const std::map<std::string, std::string>& kv,
                                MicroarchConfig c) {
  const std::map<std::string, std::uint32_t MicroarchConfig::*> fields = {
      {"width", &MicroarchConfig::width},
      {"ls_units", &MicroarchConfig::ls_units},
      {"lsq_entries", &MicroarchConfig::lsq_entries},
      {"num_phys_regs", &MicroarchConfig::num_phys_regs},
      {"rob_size", &MicroarchConfig::rob_size},
      {"l1d_kib", &MicroarchConfig::l1d_kib},
      {"l1i_kib", &MicroarchConfig::l1i_kib},
      {"l2_mib", &MicroarchConfig::l2_mib},
      {"l1_hit_cycles", &MicroarchConfig::l1_hit_cycles},
      {"l2_hit_cycles", &MicroarchConfig::l2_hit_cycles},
      {"dram_cycles", &MicroarchConfig::dram_cycles},
      {"cache_ways", &MicroarchConfig::cache_ways},
      {"line_bytes", &MicroarchConfig::line_bytes},
      {"mispredict_penalty", &MicroarchConfig::mispredict_penalty},
      {"predictor_entries", &MicroarchConfig::predictor_entries},
      {"arch_regs", &MicroarchConfig::arch_regs},
  };
  for (const auto& [key, value] : kv) {
    if (key == "name") {
      c.name = value;
    } else if (auto it = fields.find(key); it != fields.end()) {
      c.*(it->second) = parse_u32(key, value);
    } else if (key.starts_with("lat.")) {
      const auto op = key.substr(4);
      bool found = false;
      for (std::size_t i = 0; i < kNumOpClasses; ++i) {
        if (opclass_name(static_cast<OpClass>(i)) == op) {
          c.op_latency[i] = parse_u32(key, value);
          found = true;
        }
      }
      if (!found) throw std::invalid_argument("unknown opclass in key " + key);
    } else {
      throw std::invalid_argument("unknown microarch key: " + key);
    }
  }
  if (auto why = c.invariant_violation(); !why.empty()) {
    throw std::invalid_argument("microarch config: " + why);
  }
  return c;
}

namespace {

// Load/store port reservations per cycle. Cycles older than the current
// dispatch cycle can never be requested again and are pruned.
class PortCalendar {
 public:
  explicit PortCalendar(std::uint32_t ports) : ports_(ports) {}

  std::uint64_t reserve(std::uint64_t earliest) {
    auto cycle = earliest;
    auto it = used_.lower_bound(cycle);
    while (it != used_.end() && it->first == cycle && it->second >= ports_) {
      ++cycle;
      ++it;
    }
    ++used_[cycle];
    return cycle;
  }

  void prune_before(std::uint64_t cycle) { used_.erase(used_.begin(), used_.lower_bound(cycle)); }

 private:
  std::uint32_t ports_;
  std::map<std::uint64_t, std::uint32_t> used_;
};

std::uint32_t level_latency(const MicroarchConfig& c, MemLevel level) {
  switch (level) {
    case MemLevel::L1: return c.l1_hit_cycles;
    case MemLevel::L2: return c.l2_hit_cycles;
    case MemLevel::Dram: return c.dram_cycles;
    case MemLevel::None: return 0;
  }
  return 0;
}

}  // namespace

std::vector<InstructionRecord> simulate(std::span<const InstructionRecord> records,
                                        const MicroarchConfig& cfg, const SimOptions& options,
                                        SimAudit* audit) {
  if (auto why = cfg.invariant_violation(); !why.empty()) {
    throw std::invalid_argument("microarch config: " + why);
  }
  const std::size_t n = records.size();
  std::vector<InstructionRecord> out(records.begin(), records.end());
  if (audit) audit->timing.assign(n, InstrTiming{});
  if (n == 0) return out;

  CacheHierarchy caches(std::uint64_t{cfg.l1d_kib} << 10, std::uint64_t{cfg.l1i_kib} << 10,
                        std::uint64_t{cfg.l2_mib} << 20, cfg.cache_ways, cfg.line_bytes);
  const std::uint64_t line_mask = ~std::uint64_t{cfg.line_bytes - 1};

  if (options.warm_caches) {
    std::uint64_t last_line = ~std::uint64_t{0};
    for (const auto& r : records) {
      if ((r.pc & line_mask) != last_line) {
        caches.access_inst(r.pc);
        last_line = r.pc & line_mask;
      }
      if (r.has_mem()) caches.access_data(r.mem_addr);
    }
  }

  std::vector<std::uint8_t> predictor(cfg.predictor_entries, 1);
  std::array<std::array<std::uint64_t, 256>, 4> reg_ready{};
  std::vector<std::uint64_t> retire(n);
  std::vector<std::size_t> dst_owner;  // index of each register-writing instruction
  std::vector<std::size_t> mem_owner;  // index of each memory op
  const std::uint64_t rename_pool = cfg.num_phys_regs - cfg.arch_regs;

  PortCalendar ports(cfg.ls_units);
  std::uint64_t front_ready = 0;
  std::uint64_t disp_cycle = 0;
  std::uint32_t disp_count = 0;
  std::uint64_t last_iline = ~std::uint64_t{0};

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    InstrTiming t;

    // Dispatch: in order, at most `width` per cycle, gated by ROB, rename
    // registers, and LSQ entries.
    std::uint64_t d = std::max(front_ready, disp_cycle);
    if (d == disp_cycle && disp_count == cfg.width) d = disp_cycle + 1;
    if (i >= cfg.rob_size) d = std::max(d, retire[i - cfg.rob_size] + 1);
    const bool writes_reg = r.dst.is_used();
    if (writes_reg && dst_owner.size() >= rename_pool) {
      d = std::max(d, retire[dst_owner[dst_owner.size() - rename_pool]] + 1);
    }
    if (r.has_mem() && mem_owner.size() >= cfg.lsq_entries) {
      d = std::max(d, retire[mem_owner[mem_owner.size() - cfg.lsq_entries]] + 1);
    }
    if ((r.pc & line_mask) != last_iline) {
      last_iline = r.pc & line_mask;
      const auto level = caches.access_inst(r.pc);
      if (level != MemLevel::L1) d += level_latency(cfg, level);
    }
    if (d != disp_cycle) {
      disp_cycle = d;
      disp_count = 0;
    }
    ++disp_count;
    t.dispatch = d;
    ports.prune_before(d);

    // Issue once operands are ready; memory ops also need a free port.
    std::uint64_t ready = d + 1;
    for (const RegRef* src : {&r.src1, &r.src2}) {
      if (src->is_used()) {
        ready = std::max(ready, reg_ready[static_cast<std::size_t>(src->reg_class)][src->index]);
      }
    }
    std::uint64_t latency = cfg.op_latency[static_cast<std::size_t>(r.opclass)];
    if (r.has_mem()) {
      t.issue = ports.reserve(ready);
      t.level = caches.access_data(r.mem_addr);
      if (r.is_load()) latency += level_latency(cfg, t.level);
    } else {
      t.issue = ready;
    }
    t.complete = t.issue + latency;
    if (writes_reg) {
      reg_ready[static_cast<std::size_t>(r.dst.reg_class)][r.dst.index] = t.complete;
      dst_owner.push_back(i);
    }
    if (r.has_mem()) mem_owner.push_back(i);

    // Conditional branches: 2-bit counters indexed by pc; the outcome is
    // recovered from the next pc in the trace.
    if (r.opclass == OpClass::Branch) {
      const bool taken = i + 1 < n && records[i + 1].pc != r.pc + 4;
      auto& ctr = predictor[(r.pc >> 2) % cfg.predictor_entries];
      const bool predicted = ctr >= 2;
      if (taken && ctr < 3) ++ctr;
      if (!taken && ctr > 0) --ctr;
      if (predicted != taken) {
        t.mispredicted = true;
        front_ready = std::max(front_ready, t.complete + cfg.mispredict_penalty);
      }
    }

    // In-order retirement, at most `width` per cycle.
    std::uint64_t rt = t.complete;
    if (i > 0) rt = std::max(rt, retire[i - 1]);
    if (i >= cfg.width && retire[i - cfg.width] == rt) ++rt;
    retire[i] = rt;
    t.retire = rt;

    const std::uint64_t gap = i == 0 ? rt : rt - retire[i - 1];
    out[i].gt_cycles = static_cast<std::uint32_t>(std::min<std::uint64_t>(gap, 0xFFFFFFFEull));
    if (audit) audit->timing[i] = t;
  }
  return out;
}

std::uint64_t max_rob_occupancy(const SimAudit& audit) {
  // Sweep over +1 at dispatch and -1 after retire.
  std::map<std::uint64_t, std::int64_t> delta;
  for (const auto& t : audit.timing) {
    ++delta[t.dispatch];
    --delta[t.retire + 1];
  }
  std::int64_t cur = 0, best = 0;
  for (const auto& [cycle, dv] : delta) {
    cur += dv;
    best = std::max(best, cur);
  }
  return static_cast<std::uint64_t>(best);
}

std::uint64_t max_lsq_occupancy(const SimAudit& audit,
                                std::span<const InstructionRecord> records) {
  std::map<std::uint64_t, std::int64_t> delta;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].has_mem()) continue;
    ++delta[audit.timing[i].dispatch];
    --delta[audit.timing[i].retire + 1];
  }
  std::int64_t cur = 0, best = 0;
  for (const auto& [cycle, dv] : delta) {
    cur += dv;
    best = std::max(best, cur);
  }
  return static_cast<std::uint64_t>(best);
}

}  // namespace latpred
