#include "latpred/trace.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>

namespace latpred {
namespace {

constexpr char kMagic[4] = {'N', 'S', 'T', 'R'};

template <typename T>
void put_le(std::uint8_t* out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i));
  }
}

template <typename T>
T get_le(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

void encode_record(const InstructionRecord& r, bool labeled, std::uint8_t* out) {
  std::memset(out, 0, kTraceRecordBytes);
  put_le<std::uint64_t>(out + 0, r.pc);
  put_le<std::uint64_t>(out + 8, r.mem_addr);
  put_le<std::uint16_t>(out + 16, static_cast<std::uint16_t>(r.opclass));
  out[18] = static_cast<std::uint8_t>(r.dst.reg_class);
  out[19] = r.dst.index;
  out[20] = static_cast<std::uint8_t>(r.src1.reg_class);
  out[21] = r.src1.index;
  out[22] = static_cast<std::uint8_t>(r.src2.reg_class);
  out[23] = r.src2.index;
  out[24] = r.flags;
  out[25] = 0;
  put_le<std::uint32_t>(out + 28, labeled ? r.gt_cycles : kUnlabeled);
}

InstructionRecord decode_record(const std::uint8_t* in) {
  InstructionRecord r;
  r.pc = get_le<std::uint64_t>(in + 0);
  r.mem_addr = get_le<std::uint64_t>(in + 8);
  r.opclass = static_cast<OpClass>(get_le<std::uint16_t>(in + 16));
  r.dst = {static_cast<RegClass>(in[18]), in[19]};
  r.src1 = {static_cast<RegClass>(in[20]), in[21]};
  r.src2 = {static_cast<RegClass>(in[22]), in[23]};
  r.flags = in[24];
  r.gt_cycles = get_le<std::uint32_t>(in + 28);
  return r;
}

}  // namespace

bool RegRef::valid() const {
  switch (reg_class) {
    case RegClass::Integer:
    case RegClass::Float:
    case RegClass::Vector:
    case RegClass::Misc:
      return true;
    case RegClass::Unused:
      return index == 255;
  }
  return false;
}

std::string_view opclass_name(OpClass op) {
  static constexpr std::string_view kNames[kNumOpClasses] = {
      "IntAlu", "IntMul", "IntDiv", "FloatAdd", "FloatMul", "FloatDiv",
      "Load",   "Store",  "Branch", "Call",     "Return",   "Nop",
      "SimdAlu", "Fence", "CsrOp",  "Other"};
  const auto idx = static_cast<std::size_t>(op);
  return idx < kNumOpClasses ? kNames[idx] : std::string_view{"?"};
}

std::string InstructionRecord::invariant_violation() const {
  if (static_cast<std::size_t>(opclass) >= kNumOpClasses) return "opclass out of range";
  if (!dst.valid() || !src1.valid() || !src2.valid()) return "invalid register operand";
  if ((flags & flags::kReservedMask) != 0) return "reserved flag bits set";
  if (!has_mem() && mem_addr != 0) return "mem_addr set without has_mem";
  if (is_load() && is_store()) return "record is both load and store";
  if ((is_load() || is_store()) && !has_mem()) return "load/store without has_mem";
  return {};
}

std::size_t write_trace(std::span<const InstructionRecord> records, bool labeled,
                        std::ostream& sink, std::uint32_t epoch_len) {
  std::uint8_t header[kTraceHeaderBytes] = {};
  std::memcpy(header, kMagic, 4);
  put_le<std::uint16_t>(header + 4, kTraceVersion);
  put_le<std::uint16_t>(header + 6, labeled ? 1 : 0);
  put_le<std::uint64_t>(header + 8, records.size());
  put_le<std::uint32_t>(header + 16, epoch_len);
  sink.write(reinterpret_cast<const char*>(header), sizeof(header));

  std::vector<std::uint8_t> buf(kTraceRecordBytes * std::min<std::size_t>(records.size(), 4096));
  std::size_t i = 0;
  while (i < records.size()) {
    const std::size_t n = std::min(records.size() - i, buf.size() / kTraceRecordBytes);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& r = records[i + k];
      if (auto why = r.invariant_violation(); !why.empty()) {
        throw TraceError("record " + std::to_string(i + k) + ": " + why);
      }
      encode_record(r, labeled, buf.data() + k * kTraceRecordBytes);
    }
    sink.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(n * kTraceRecordBytes));
    i += n;
  }
  if (!sink) throw TraceError("trace write failed");
  return kTraceHeaderBytes + kTraceRecordBytes * records.size();
}

Trace read_trace(std::istream& source) {
  std::uint8_t header[kTraceHeaderBytes];
  if (!source.read(reinterpret_cast<char*>(header), sizeof(header))) {
    throw TraceError("truncated header");
  }
  if (std::memcmp(header, kMagic, 4) != 0) throw TraceError("bad magic");
  const auto version = get_le<std::uint16_t>(header + 4);
  if (version != kTraceVersion) {
    throw TraceError("unsupported version " + std::to_string(version));
  }
  const auto hflags = get_le<std::uint16_t>(header + 6);
  Trace trace;
  trace.labeled = (hflags & 1u) != 0;
  const auto count = get_le<std::uint64_t>(header + 8);
  trace.epoch_len = get_le<std::uint32_t>(header + 16);

  std::vector<std::uint8_t> buf(kTraceRecordBytes * 4096);
  trace.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 26)));
  std::uint64_t done = 0;
  while (done < count) {
    const auto n = static_cast<std::size_t>(
        std::min<std::uint64_t>(count - done, buf.size() / kTraceRecordBytes));
    source.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(n * kTraceRecordBytes));
    if (static_cast<std::size_t>(source.gcount()) != n * kTraceRecordBytes) {
      throw TraceError("truncated body: expected " + std::to_string(count) + " records");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint8_t* raw = buf.data() + k * kTraceRecordBytes;
      auto r = decode_record(raw);
      if (raw[25] != 0) throw TraceError("record " + std::to_string(done + k) + ": pad byte set");
      if (auto why = r.invariant_violation(); !why.empty()) {
        throw TraceError("record " + std::to_string(done + k) + ": " + why);
      }
      if (!trace.labeled) r.gt_cycles = kUnlabeled;
      trace.records.push_back(r);
    }
    done += n;
  }
  return trace;
}

void write_trace_file(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceError("cannot open " + path + " for writing");
  write_trace(trace.records, trace.labeled, out, trace.epoch_len);
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open " + path);
  return read_trace(in);
}

std::vector<Epoch> epoch_slice(std::span<const InstructionRecord> records,
                               std::size_t epoch_len) {
  if (epoch_len == 0) throw std::invalid_argument("epoch_len must be positive");
  std::vector<Epoch> epochs;
  for (std::size_t start = 0; start + epoch_len <= records.size(); start += epoch_len) {
    epochs.push_back(records.subspan(start, epoch_len));
  }
  return epochs;
}

EpochSignature epoch_signature(Epoch epoch) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                               &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
  std::uint8_t buf[8 * 512];
  std::size_t fill = 0;
  for (const auto& r : epoch) {
    put_le<std::uint64_t>(buf + fill, r.pc);
    fill += 8;
    if (fill == sizeof(buf)) {
      EVP_DigestUpdate(ctx.get(), buf, fill);
      fill = 0;
    }
  }
  if (fill > 0) EVP_DigestUpdate(ctx.get(), buf, fill);
  EpochSignature sig{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), sig.data(), &len);
  return sig;
}

std::string to_hex(const EpochSignature& sig) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : sig) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 15]);
  }
  return s;
}

GtHistogram gt_histogram(std::span<const InstructionRecord> records) {
  if (records.empty()) throw std::invalid_argument("gt_histogram: empty input");
  std::array<std::uint64_t, GtHistogram::kBins> counts{};
  for (const auto& r : records) {
    if (r.gt_cycles == kUnlabeled) throw std::invalid_argument("gt_histogram: unlabeled record");
    const std::uint32_t y = std::min<std::uint32_t>(r.gt_cycles, 1000);
    counts[y <= 10 ? y : GtHistogram::kBins - 1]++;
  }
  GtHistogram h;
  const double n = static_cast<double>(records.size());
  for (std::size_t k = 0; k < GtHistogram::kBins; ++k) h.bins[k] = counts[k] / n;
  return h;
}

}  // namespace latpred
