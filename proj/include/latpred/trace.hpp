#pragma once

// Instruction records, the binary trace format, epochs and their signatures.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace latpred {

/// Raised for malformed trace files or records that break a type invariant.
class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RegClass : std::uint8_t {
  Integer = 0,
  Float = 1,
  Vector = 2,
  Misc = 3,
  Unused = 255,
};

struct RegRef {
  RegClass reg_class = RegClass::Unused;
  std::uint8_t index = 255;

  static constexpr RegRef unused() { return {}; }
  static constexpr RegRef integer(std::uint8_t i) { return {RegClass::Integer, i}; }
  static constexpr RegRef fp(std::uint8_t i) { return {RegClass::Float, i}; }
  static constexpr RegRef vec(std::uint8_t i) { return {RegClass::Vector, i}; }

  [[nodiscard]] constexpr bool is_used() const { return reg_class != RegClass::Unused; }
  [[nodiscard]] bool valid() const;

  friend bool operator==(const RegRef&, const RegRef&) = default;
};

/// Fixed 16-entry operation-class vocabulary.
enum class OpClass : std::uint16_t {
  IntAlu = 0,
  IntMul,
  IntDiv,
  FloatAdd,
  FloatMul,
  FloatDiv,
  Load,
  Store,
  Branch,
  Call,
  Return,
  Nop,
  SimdAlu,
  Fence,
  CsrOp,
  Other,
};
inline constexpr std::size_t kNumOpClasses = 16;

std::string_view opclass_name(OpClass op);

namespace flags {
inline constexpr std::uint8_t kHasMem = 1u << 0;
inline constexpr std::uint8_t kIsLoad = 1u << 1;
inline constexpr std::uint8_t kIsStore = 1u << 2;
inline constexpr std::uint8_t kIsBranch = 1u << 3;
inline constexpr std::uint8_t kReservedMask = 0xF0;
}  // namespace flags

inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

struct InstructionRecord {
  std::uint64_t pc = 0;
  std::uint64_t mem_addr = 0;
  OpClass opclass = OpClass::Nop;
  RegRef dst;
  RegRef src1;
  RegRef src2;
  std::uint8_t flags = 0;
  std::uint32_t gt_cycles = kUnlabeled;

  [[nodiscard]] bool has_mem() const { return (flags & flags::kHasMem) != 0; }
  [[nodiscard]] bool is_load() const { return (flags & flags::kIsLoad) != 0; }
  [[nodiscard]] bool is_store() const { return (flags & flags::kIsStore) != 0; }
  [[nodiscard]] bool is_branch() const { return (flags & flags::kIsBranch) != 0; }

  /// Empty string when every invariant holds, otherwise the first violation.
  [[nodiscard]] std::string invariant_violation() const;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

struct Trace {
  bool labeled = false;
  std::uint32_t epoch_len = 100'000;
  std::vector<InstructionRecord> records;
};

inline constexpr std::size_t kTraceHeaderBytes = 32;
inline constexpr std::size_t kTraceRecordBytes = 32;
inline constexpr std::uint16_t kTraceVersion = 1;

/// Serializes records (little-endian, 32-byte header + 32 bytes per record).
/// Unlabeled traces store 0xFFFFFFFF in gt_cycles. Returns bytes written.
std::size_t write_trace(std::span<const InstructionRecord> records, bool labeled,
                        std::ostream& sink, std::uint32_t epoch_len = 100'000);
Trace read_trace(std::istream& source);

void write_trace_file(const std::string& path, const Trace& trace);
Trace read_trace_file(const std::string& path);

/// A contiguous, non-owning block of exactly epoch_len records.
using Epoch = std::span<const InstructionRecord>;

/// Consecutive non-overlapping epochs; a trailing partial epoch is dropped.
std::vector<Epoch> epoch_slice(std::span<const InstructionRecord> records,
                               std::size_t epoch_len);

using EpochSignature = std::array<std::uint8_t, 32>;

/// SHA-256 over each record's pc as 8 little-endian bytes.
EpochSignature epoch_signature(Epoch epoch);
std::string to_hex(const EpochSignature& sig);

/// Fractions for cycle bins 0..10 followed by a tail bin for (10, 1000].
struct GtHistogram {
  static constexpr std::size_t kBins = 12;
  std::array<double, kBins> bins{};
};

GtHistogram gt_histogram(std::span<const InstructionRecord> records);

}  // namespace latpred
