#include "latpred/cache.hpp"

#include <bit>
#include <stdexcept>

namespace latpred {

SetAssocCache::SetAssocCache(std::uint64_t size_bytes, std::uint32_t ways,
                             std::uint32_t line_bytes)
    : ways_(ways) {
  if (ways == 0 || line_bytes == 0 || !std::has_single_bit(line_bytes)) {
    throw std::invalid_argument("cache: ways must be >= 1 and line size a power of two");
  }
  const std::uint64_t lines = size_bytes / line_bytes;
  if (lines < ways || lines % ways != 0) {
    throw std::invalid_argument("cache: size must hold a whole number of sets");
  }
  sets_ = static_cast<std::uint32_t>(lines / ways);
  line_shift_ = static_cast<std::uint32_t>(std::countr_zero(line_bytes));
  lines_.resize(static_cast<std::size_t>(sets_) * ways_);
}

bool SetAssocCache::access(std::uint64_t addr) {
  const std::uint64_t line = addr >> line_shift_;
  const std::uint64_t set = line % sets_;
  const std::uint64_t tag = line / sets_;
  Way* base = &lines_[set * ways_];
  ++clock_;
  Way* victim = base;
  for (std::uint32_t w = 0; w < ways_; ++w) {
    Way& way = base[w];
    if (way.valid && way.tag == tag) {
      way.last_use = clock_;
      ++hits_;
      return true;
    }
    if (!way.valid) {
      if (victim->valid) victim = &way;
    } else if (victim->valid && way.last_use < victim->last_use) {
      victim = &way;
    }
  }
  victim->valid = true;
  victim->tag = tag;
  victim->last_use = clock_;
  ++misses_;
  return false;
}

bool SetAssocCache::contains(std::uint64_t addr) const {
  const std::uint64_t line = addr >> line_shift_;
  const std::uint64_t set = line % sets_;
  const std::uint64_t tag = line / sets_;
  const Way* base = &lines_[set * ways_];
  for (std::uint32_t w = 0; w < ways_; ++w) {
    if (base[w].valid && base[w].tag == tag) return true;
  }
  return false;
}

void SetAssocCache::clear() {
  for (auto& w : lines_) w = Way{};
  clock_ = hits_ = misses_ = 0;
}

CacheHierarchy::CacheHierarchy(std::uint64_t l1d_bytes, std::uint64_t l1i_bytes,
                               std::uint64_t l2_bytes, std::uint32_t ways,
                               std::uint32_t line_bytes)
    : l1d_(l1d_bytes, ways, line_bytes),
      l1i_(l1i_bytes, ways, line_bytes),
      l2_(l2_bytes, ways, line_bytes) {}

MemLevel CacheHierarchy::access_data(std::uint64_t addr) {
  if (l1d_.access(addr)) return MemLevel::L1;
  return l2_.access(addr) ? MemLevel::L2 : MemLevel::Dram;
}

MemLevel CacheHierarchy::access_inst(std::uint64_t addr) {
  if (l1i_.access(addr)) return MemLevel::L1;
  return l2_.access(addr) ? MemLevel::L2 : MemLevel::Dram;
}

}  // namespace latpred
