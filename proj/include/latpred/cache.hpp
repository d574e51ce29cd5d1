#pragma once

#include <cstdint>
#include <vector>

namespace latpred {

/// Set-associative cache with true LRU replacement. Tracks tags only.
class SetAssocCache {
 public:
  SetAssocCache(std::uint64_t size_bytes, std::uint32_t ways, std::uint32_t line_bytes);

  /// Looks up the line holding addr, updating LRU state and allocating on miss.
  /// Returns true on hit.
  bool access(std::uint64_t addr);

  /// Lookup without any state change.
  [[nodiscard]] bool contains(std::uint64_t addr) const;

  void clear();

  [[nodiscard]] std::uint32_t num_sets() const { return sets_; }
  [[nodiscard]] std::uint32_t ways() const { return ways_; }
  [[nodiscard]] std::uint64_t hits() const { return hits_; }
  [[nodiscard]] std::uint64_t misses() const { return misses_; }

 private:
  struct Way {
    std::uint64_t tag = 0;
    std::uint64_t last_use = 0;
    bool valid = false;
  };

  std::uint32_t sets_;
  std::uint32_t ways_;
  std::uint32_t line_shift_;
  std::uint64_t clock_ = 0;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  std::vector<Way> lines_;
};

enum class MemLevel : std::uint8_t { None = 0, L1 = 1, L2 = 2, Dram = 3 };

/// Private L1I/L1D over a shared L2. Misses allocate in every level they pass.
class CacheHierarchy {
 public:
  CacheHierarchy(std::uint64_t l1d_bytes, std::uint64_t l1i_bytes, std::uint64_t l2_bytes,
                 std::uint32_t ways, std::uint32_t line_bytes);

  MemLevel access_data(std::uint64_t addr);
  MemLevel access_inst(std::uint64_t addr);

 private:
  SetAssocCache l1d_;
  SetAssocCache l1i_;
  SetAssocCache l2_;
};

}  // namespace latpred
