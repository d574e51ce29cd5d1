#include <algorithm>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "latpred/rng.hpp"
#include "latpred/sim.hpp"

namespace latpred {
namespace {

constexpr std::uint64_t kCodeBase = 0x0000'0000'0040'0000ull;
constexpr std::uint64_t kCodeStride = 0x1'0000ull;
constexpr std::uint64_t kDataBase = 0x0000'7f00'0000'0000ull;
constexpr std::uint64_t kDataStride = 0x0000'0001'0000'0000ull;

InstructionRecord make(std::uint64_t pc, OpClass op, RegRef dst, RegRef s1, RegRef s2,
                       std::uint64_t mem = 0) {
  InstructionRecord r;
  r.pc = pc;
  r.opclass = op;
  r.dst = dst;
  r.src1 = s1;
  r.src2 = s2;
  switch (op) {
    case OpClass::Load:
      r.flags = flags::kHasMem | flags::kIsLoad;
      r.mem_addr = mem;
      break;
    case OpClass::Store:
      r.flags = flags::kHasMem | flags::kIsStore;
      r.mem_addr = mem;
      break;
    case OpClass::Branch:
    case OpClass::Call:
    case OpClass::Return:
      r.flags = flags::kIsBranch;
      break;
    default:
      break;
  }
  return r;
}

constexpr auto X = RegRef::integer;
constexpr auto F = RegRef::fp;
constexpr RegRef kNone = RegRef::unused();

// Each generator appends one loop iteration per call. Iterations end with a
// control transfer so the next iteration (or another generator) may follow.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual void iteration(std::vector<InstructionRecord>& out) = 0;
};

class LoopAluGen final : public Generator {
 public:
  LoopAluGen(std::uint64_t code, std::uint64_t seed) : code_(code) {
    Rng rng(seed);
    const std::size_t len = 8 + rng.below(9);
    for (std::size_t k = 0; k < len; ++k) {
      const double u = rng.uniform();
      OpClass op = OpClass::IntAlu;
      if (u < 0.10) op = OpClass::IntMul;
      else if (u < 0.13) op = OpClass::IntDiv;
      else if (u < 0.25) op = OpClass::FloatAdd;
      else if (u < 0.35) op = OpClass::FloatMul;
      else if (u < 0.37) op = OpClass::FloatDiv;
      else if (u < 0.42) op = OpClass::SimdAlu;
      const bool is_fp = op == OpClass::FloatAdd || op == OpClass::FloatMul ||
                         op == OpClass::FloatDiv;
      const bool is_vec = op == OpClass::SimdAlu;
      auto reg = [&](std::uint64_t i) {
        const auto idx = static_cast<std::uint8_t>(1 + i);
        return is_fp ? F(idx) : is_vec ? RegRef::vec(idx) : X(idx);
      };
      // Short dependency chains over a handful of registers.
      const auto d = rng.below(6);
      const auto a = rng.below(6);
      const auto b = rng.below(6);
      body_.push_back({op, reg(d), reg(a), reg(b)});
    }
  }

  void iteration(std::vector<InstructionRecord>& out) override {
    std::uint64_t pc = code_;
    for (const auto& s : body_) {
      out.push_back(make(pc, s.op, s.dst, s.a, s.b));
      pc += 4;
    }
    out.push_back(make(pc, OpClass::IntAlu, X(10), X(10), kNone));
    pc += 4;
    out.push_back(make(pc, OpClass::Branch, kNone, X(10), kNone));
    pc += 4;
    if (++trip_ == kTrip) {
      trip_ = 0;
      out.push_back(make(pc, OpClass::IntAlu, X(10), kNone, kNone));
      pc += 4;
      out.push_back(make(pc, OpClass::Branch, kNone, kNone, kNone));
    }
  }

 private:
  struct Slot {
    OpClass op;
    RegRef dst, a, b;
  };
  static constexpr int kTrip = 64;
  std::uint64_t code_;
  std::vector<Slot> body_;
  int trip_ = 0;
};

class PointerChaseGen final : public Generator {
 public:
  PointerChaseGen(std::uint64_t code, std::uint64_t data, std::uint64_t footprint,
                  std::uint64_t seed)
      : code_(code), data_(data) {
    const std::uint64_t nodes = std::max<std::uint64_t>(footprint / 64, 2);
    next_.resize(nodes);
    // Sattolo's algorithm: a single cycle through every node.
    std::vector<std::uint32_t> perm(nodes);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng(seed);
    for (std::uint64_t i = nodes - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.below(i)]);
    }
    for (std::uint64_t i = 0; i < nodes; ++i) {
      next_[perm[i]] = perm[(i + 1) % nodes];
    }
  }

  void iteration(std::vector<InstructionRecord>& out) override {
    std::uint64_t pc = code_;
    const std::uint64_t addr = data_ + static_cast<std::uint64_t>(cur_) * 64;
    out.push_back(make(pc, OpClass::Load, X(1), X(1), kNone, addr));
    pc += 4;
    out.push_back(make(pc, OpClass::Load, X(4), X(1), kNone, addr + 8));
    pc += 4;
    out.push_back(make(pc, OpClass::IntAlu, X(2), X(2), X(4)));
    pc += 4;
    out.push_back(make(pc, OpClass::IntAlu, X(3), X(3), X(2)));
    pc += 4;
    out.push_back(make(pc, OpClass::IntAlu, X(5), X(5), kNone));
    pc += 4;
    out.push_back(make(pc, OpClass::Branch, kNone, X(1), kNone));
    cur_ = next_[cur_];
  }

 private:
  std::uint64_t code_;
  std::uint64_t data_;
  std::vector<std::uint32_t> next_;
  std::uint32_t cur_ = 0;
};

class StreamingGen final : public Generator {
 public:
  StreamingGen(std::uint64_t code, std::uint64_t data, std::uint64_t footprint)
      : code_(code), data_(data) {
    // Three arrays (two sources, one destination) share the footprint.
    elems_ = std::max<std::uint64_t>(footprint / (3 * 8), 1);
    array_bytes_ = ((elems_ * 8 + 63) / 64) * 64;
  }

  void iteration(std::vector<InstructionRecord>& out) override {
    std::uint64_t pc = code_;
    const std::uint64_t off = i_ * 8;
    const std::uint64_t a = data_ + off;
    const std::uint64_t b = data_ + array_bytes_ + off;
    const std::uint64_t c = data_ + 2 * array_bytes_ + off;
    out.push_back(make(pc, OpClass::Load, F(1), X(6), kNone, a));
    pc += 4;
    out.push_back(make(pc, OpClass::Load, F(2), X(6), kNone, b));
    pc += 4;
    out.push_back(make(pc, OpClass::FloatMul, F(3), F(1), F(7)));
    pc += 4;
    out.push_back(make(pc, OpClass::FloatAdd, F(3), F(3), F(2)));
    pc += 4;
    out.push_back(make(pc, OpClass::Store, kNone, X(6), F(3), c));
    pc += 4;
    out.push_back(make(pc, OpClass::IntAlu, X(6), X(6), kNone));
    pc += 4;
    out.push_back(make(pc, OpClass::Branch, kNone, X(6), kNone));
    if (++i_ == elems_) i_ = 0;
  }

 private:
  std::uint64_t code_;
  std::uint64_t data_;
  std::uint64_t elems_;
  std::uint64_t array_bytes_;
  std::uint64_t i_ = 0;
};

class BranchyGen final : public Generator {
 public:
  BranchyGen(std::uint64_t code, std::uint64_t data, std::uint64_t footprint,
             std::uint64_t seed)
      : code_(code), data_(data), rng_(seed) {
    words_ = std::max<std::uint64_t>(footprint / 8, 1);
  }

  void iteration(std::vector<InstructionRecord>& out) override {
    std::uint64_t pc = code_;
    const std::uint64_t addr = data_ + (j_ % words_) * 8;
    j_ += 1;
    out.push_back(make(pc, OpClass::Load, X(1), X(7), kNone, addr));
    pc += 4;
    out.push_back(make(pc, OpClass::IntAlu, X(7), X(7), kNone));
    pc += 4;
    // Three data-dependent branches with different biases, each guarding a
    // short block that is skipped when taken.
    static constexpr double kTakenProb[] = {0.5, 0.9, 0.97};
    for (double p : kTakenProb) {
      out.push_back(make(pc, OpClass::IntAlu, X(2), X(1), kNone));
      pc += 4;
      out.push_back(make(pc, OpClass::Branch, kNone, X(2), kNone));
      pc += 4;
      const bool taken = rng_.bernoulli(p);
      if (!taken) {
        out.push_back(make(pc, OpClass::IntAlu, X(3), X(3), X(1)));
        out.push_back(make(pc + 4, OpClass::IntMul, X(4), X(3), X(4)));
        out.push_back(make(pc + 8, OpClass::IntAlu, X(5), X(4), X(5)));
      }
      pc += 12;
    }
    out.push_back(make(pc, OpClass::Branch, kNone, X(7), kNone));
  }

 private:
  std::uint64_t code_;
  std::uint64_t data_;
  std::uint64_t words_;
  std::uint64_t j_ = 0;
  Rng rng_;
};

std::unique_ptr<Generator> make_generator(WorkloadKind kind, std::uint64_t footprint,
                                          std::uint64_t seed) {
  const auto region = static_cast<std::uint64_t>(kind);
  const std::uint64_t code = kCodeBase + region * kCodeStride;
  const std::uint64_t data = kDataBase + region * kDataStride;
  switch (kind) {
    case WorkloadKind::LoopAlu:
      return std::make_unique<LoopAluGen>(code, derive_seed(seed, "loop_alu"));
    case WorkloadKind::PointerChase:
      return std::make_unique<PointerChaseGen>(code, data, footprint,
                                               derive_seed(seed, "pointer_chase"));
    case WorkloadKind::Streaming:
      return std::make_unique<StreamingGen>(code, data, footprint);
    case WorkloadKind::Branchy:
      return std::make_unique<BranchyGen>(code, data, footprint, derive_seed(seed, "branchy"));
    case WorkloadKind::Mixed:
      break;
  }
  throw std::logic_error("mixed workload has no single generator");
}

}  // namespace

std::optional<WorkloadKind> workload_kind_from_string(const std::string& s) {
  if (s == "loop_alu") return WorkloadKind::LoopAlu;
  if (s == "pointer_chase") return WorkloadKind::PointerChase;
  if (s == "streaming") return WorkloadKind::Streaming;
  if (s == "branchy") return WorkloadKind::Branchy;
  if (s == "mixed") return WorkloadKind::Mixed;
  return std::nullopt;
}

std::string to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::LoopAlu: return "loop_alu";
    case WorkloadKind::PointerChase: return "pointer_chase";
    case WorkloadKind::Streaming: return "streaming";
    case WorkloadKind::Branchy: return "branchy";
    case WorkloadKind::Mixed: return "mixed";
  }
  return "?";
}

std::vector<InstructionRecord> gen_workload(const WorkloadSpec& spec) {
  if (spec.instruction_count == 0) throw std::invalid_argument("instruction_count must be >= 1");
  if (spec.footprint_bytes < 64) throw std::invalid_argument("footprint_bytes must be >= 64");

  std::vector<InstructionRecord> out;
  out.reserve(spec.instruction_count + 64);
  const auto n = spec.instruction_count;

  if (spec.kind != WorkloadKind::Mixed) {
    auto gen = make_generator(spec.kind, spec.footprint_bytes, spec.seed);
    while (out.size() < n) gen->iteration(out);
  } else {
    // Phases of 1k-4k instructions cycling through the four kernels; every
    // kernel keeps its state across phases.
    static constexpr WorkloadKind kOrder[] = {WorkloadKind::LoopAlu, WorkloadKind::PointerChase,
                                              WorkloadKind::Streaming, WorkloadKind::Branchy};
    std::vector<std::unique_ptr<Generator>> gens;
    for (auto k : kOrder) gens.push_back(make_generator(k, spec.footprint_bytes, spec.seed));
    Rng phase_rng(derive_seed(spec.seed, "phases"));
    std::size_t which = 0;
    while (out.size() < n) {
      const std::size_t phase_end = out.size() + 1000 + phase_rng.below(3001);
      while (out.size() < phase_end && out.size() < n) gens[which]->iteration(out);
      which = (which + 1) % gens.size();
    }
  }
  out.resize(n);
  return out;
}

}  // namespace latpred
