#pragma once

// Teacher simulator: a scoreboard-style out-of-order core that labels each
// instruction with the cycles elapsed since the previous retirement.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latpred/cache.hpp"
#include "latpred/trace.hpp"

namespace latpred {

struct MicroarchConfig {
  std::string name = "8w";
  std::uint32_t width = 8;
  std::uint32_t ls_units = 1;
  std::uint32_t lsq_entries = 32;
  std::uint32_t num_phys_regs = 256;
  std::uint32_t rob_size = 192;
  std::uint32_t l1d_kib = 64;
  std::uint32_t l1i_kib = 64;
  std::uint32_t l2_mib = 8;

  // Execution latency per opclass, indexed by OpClass.
  std::array<std::uint32_t, kNumOpClasses> op_latency = {
      1,   // IntAlu
      3,   // IntMul
      12,  // IntDiv
      4,   // FloatAdd
      4,   // FloatMul
      12,  // FloatDiv
      1,   // Load (address generation; memory level added on top)
      1,   // Store
      1,   // Branch
      1,   // Call
      1,   // Return
      1,   // Nop
      2,   // SimdAlu
      1,   // Fence
      1,   // CsrOp
      1,   // Other
  };
  std::uint32_t l1_hit_cycles = 4;
  std::uint32_t l2_hit_cycles = 14;
  std::uint32_t dram_cycles = 120;

  std::uint32_t cache_ways = 8;
  std::uint32_t line_bytes = 64;
  std::uint32_t mispredict_penalty = 12;
  std::uint32_t predictor_entries = 4096;
  // Physical registers permanently holding architectural state; the rest form
  // the rename pool.
  std::uint32_t arch_regs = 64;

  /// Empty when valid, otherwise a description of the first violated invariant.
  [[nodiscard]] std::string invariant_violation() const;

  friend bool operator==(const MicroarchConfig&, const MicroarchConfig&) = default;
};

/// The five configurations in canonical order (4w+mem, 8w, rob, lsq, 6w+ls).
std::vector<MicroarchConfig> default_configs();
std::optional<MicroarchConfig> config_preset(const std::string& name);

/// Flat "key = value" text using the MicroarchConfig field names; latency
/// entries are written as lat.<OpClassName>.
std::string format_microarch(const MicroarchConfig& cfg);
/// Starts from `base` and applies every key in `kv`; unknown keys throw.
MicroarchConfig parse_microarch(const std::map<std::string, std::string>& kv,
                                MicroarchConfig base = {});

enum class WorkloadKind { LoopAlu, PointerChase, Streaming, Branchy, Mixed };

std::optional<WorkloadKind> workload_kind_from_string(const std::string& s);
std::string to_string(WorkloadKind k);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Mixed;
  std::uint64_t instruction_count = 100'000;
  std::uint64_t seed = 1;
  std::uint64_t footprint_bytes = 32ull << 20;
};

/// Deterministic synthetic instruction stream (unlabeled).
std::vector<InstructionRecord> gen_workload(const WorkloadSpec& spec);

struct SimOptions {
  /// Replays the trace's memory and fetch addresses through the caches before
  /// timing starts, standing in for a fast-forward warm-up.
  bool warm_caches = true;
};

/// Per-instruction timing kept for audits and tests.
struct InstrTiming {
  std::uint64_t dispatch = 0;
  std::uint64_t issue = 0;
  std::uint64_t complete = 0;
  std::uint64_t retire = 0;
  MemLevel level = MemLevel::None;
  bool mispredicted = false;
};

struct SimAudit {
  std::vector<InstrTiming> timing;
};

std::vector<InstructionRecord> simulate(std::span<const InstructionRecord> records,
                                        const MicroarchConfig& config,
                                        const SimOptions& options = {},
                                        SimAudit* audit = nullptr);

/// Largest number of instructions resident in the ROB in any cycle, where an
/// instruction occupies its entry over [dispatch, retire].
std::uint64_t max_rob_occupancy(const SimAudit& audit);
/// Same for memory operations and the LSQ.
std::uint64_t max_lsq_occupancy(const SimAudit& audit,
                                std::span<const InstructionRecord> records);

}  // namespace latpred
