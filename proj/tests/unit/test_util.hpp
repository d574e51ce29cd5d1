#pragma once

#include <vector>

#include "latpred/rng.hpp"
#include "latpred/trace.hpp"

namespace testutil {

inline latpred::RegRef random_reg(latpred::Rng& rng) {
  const auto k = rng.below(5);
  if (k == 4) return latpred::RegRef::unused();
  return {static_cast<latpred::RegClass>(k), static_cast<std::uint8_t>(rng.below(255))};
}

/// A record that satisfies every type invariant.
inline latpred::InstructionRecord random_record(latpred::Rng& rng, bool labeled) {
  using namespace latpred;
  InstructionRecord r;
  r.pc = rng.next_u64();
  r.opclass = static_cast<OpClass>(rng.below(kNumOpClasses));
  r.dst = random_reg(rng);
  r.src1 = random_reg(rng);
  r.src2 = random_reg(rng);
  switch (rng.below(4)) {
    case 0: r.flags = 0; break;
    case 1: r.flags = flags::kHasMem | flags::kIsLoad; break;
    case 2: r.flags = flags::kHasMem | flags::kIsStore; break;
    default: r.flags = flags::kIsBranch; break;
  }
  if (r.has_mem()) r.mem_addr = rng.next_u64();
  r.gt_cycles = labeled ? static_cast<std::uint32_t>(rng.below(5000)) : kUnlabeled;
  return r;
}

inline std::vector<latpred::InstructionRecord> random_records(std::size_t n, std::uint64_t seed,
                                                              bool labeled) {
  latpred::Rng rng(seed);
  std::vector<latpred::InstructionRecord> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(random_record(rng, labeled));
  return v;
}

}  // namespace testutil
