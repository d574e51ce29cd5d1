#include "latpred/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace latpred {
namespace {

constexpr char kMagic[4] = {'N', 'S', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

std::size_t dtype_size(BlobDtype d) {
  switch (d) {
    case BlobDtype::F32: return 4;
    case BlobDtype::F16: return 2;
    case BlobDtype::F64: return 8;
    case BlobDtype::Text: return 1;
  }
  throw CheckpointError("unknown dtype code");
}

class ByteWriter {
 public:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bytes.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
  }
  void put_bytes(const std::string& s) { bytes += s; }
  std::string bytes;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& b) : bytes_(b) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("manifest truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct Entry {
  std::string name;
  BlobDtype dtype = BlobDtype::F32;
  std::vector<std::uint32_t> dims;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

std::string config_text(const ModelParameters<float>& p) {
  const auto& c = p.config();
  std::ostringstream os;
  os << "model.input_dim = " << c.input_dim << "\n"
     << "model.proj_dim = " << c.proj_dim << "\n"
     << "model.hidden = " << c.hidden << "\n"
     << "model.layers = " << c.layers << "\n"
     << "model.bidirectional = " << (c.bidirectional ? 1 : 0) << "\n"
     << "model.cls_hidden = " << c.cls_hidden << "\n"
     << "model.tau = " << c.tau << "\n";
  os.precision(17);
  os << "model.lambda_cls = " << c.lambda_cls << "\n"
     << "model.dropout_p = " << c.dropout_p << "\n"
     << "window.n = " << p.window.n << "\n"
     << "window.r = " << p.window.r << "\n"
     << "window.stride = " << p.window.stride << "\n";
  return os.str();
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw CheckpointError("malformed config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

std::size_t to_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("config entry missing: " + key);
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw CheckpointError("bad config value for " + key);
  }
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("config entry missing: " + key);
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw CheckpointError("bad config value for " + key);
  }
}

void append_f64(std::string& blob, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::uint32_t read_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

std::uint16_t float_to_half(float f) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t exp = (x >> 23) & 0xFFu;
  std::uint32_t mant = x & 0x7FFFFFu;
  if (exp == 0xFF) {
    return static_cast<std::uint16_t>(sign | 0x7C00u | (mant ? 0x200u : 0u));
  }
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 31) return static_cast<std::uint16_t>(sign | 0x7C00u);
  if (e <= 0) {
    if (e < -10) return sign;
    mant |= 0x800000u;
    const int shift = 14 - e;
    std::uint32_t half = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  std::uint32_t half = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;  // may carry into exponent
  return static_cast<std::uint16_t>(sign | half);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1Fu;
  std::uint32_t mant = h & 0x3FFu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while (!(mant & 0x400u));
      bits = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3FFu) << 13);
    }
  } else if (exp == 31) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

void save_checkpoint(const ModelParameters<float>& params, std::ostream& out,
                     BlobDtype weight_dtype) {
  if (weight_dtype != BlobDtype::F32 && weight_dtype != BlobDtype::F16) {
    throw CheckpointError("weights must be stored as f32 or f16");
  }
  std::vector<Entry> entries;
  std::string blobs;
  auto add = [&](std::string name, BlobDtype dtype, std::vector<std::uint32_t> dims,
                 const std::string& payload) {
    entries.push_back({std::move(name), dtype, std::move(dims), blobs.size(), payload.size()});
    blobs += payload;
  };

  add("meta.config", BlobDtype::Text, {static_cast<std::uint32_t>(config_text(params).size())},
      config_text(params));
  std::string mean, stdv;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    append_f64(mean, params.norm.mean[i]);
    append_f64(stdv, params.norm.stddev[i]);
  }
  add("meta.norm.mean", BlobDtype::F64, {kNumFeatures}, mean);
  add("meta.norm.std", BlobDtype::F64, {kNumFeatures}, stdv);

  for (const auto& t : params.tensors()) {
    std::string payload;
    payload.reserve(t.numel() * dtype_size(weight_dtype));
    for (float v : t.data) {
      if (weight_dtype == BlobDtype::F32) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
      } else {
        const auto bits = float_to_half(v);
        payload.push_back(static_cast<char>(bits & 0xFF));
        payload.push_back(static_cast<char>(bits >> 8));
      }
    }
    std::vector<std::uint32_t> dims(t.shape.begin(), t.shape.end());
    add(t.name, weight_dtype, dims, payload);
  }

  ByteWriter manifest;
  manifest.put<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    manifest.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    manifest.put_bytes(e.name);
    manifest.put<std::uint8_t>(static_cast<std::uint8_t>(e.dtype));
    manifest.put<std::uint8_t>(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) manifest.put<std::uint32_t>(d);
    manifest.put<std::uint64_t>(e.offset);
    manifest.put<std::uint64_t>(e.length);
  }

  ByteWriter header;
  header.put_bytes(std::string(kMagic, 4));
  header.put<std::uint16_t>(kVersion);
  header.put<std::uint32_t>(static_cast<std::uint32_t>(manifest.bytes.size()));
  out.write(header.bytes.data(), static_cast<std::streamsize>(header.bytes.size()));
  out.write(manifest.bytes.data(), static_cast<std::streamsize>(manifest.bytes.size()));
  out.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
  if (!out) throw CheckpointError("checkpoint write failed");
}

ModelParameters<float> load_checkpoint(std::istream& in) {
  char head[10];
  if (!in.read(head, sizeof head)) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(head, kMagic, 4) != 0) throw CheckpointError("bad magic");
  const std::uint16_t version = static_cast<std::uint16_t>(
      static_cast<unsigned char>(head[4]) | (static_cast<unsigned char>(head[5]) << 8));
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version");
  const std::uint32_t manifest_len = read_u32(head + 6);
  std::string manifest_bytes(manifest_len, '\0');
  if (!in.read(manifest_bytes.data(), manifest_len)) throw CheckpointError("manifest truncated");
  std::string blobs((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  ByteReader rd(manifest_bytes);
  const auto count = rd.get<std::uint32_t>();
  std::map<std::string, Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = rd.get_bytes(rd.get<std::uint16_t>());
    const auto code = rd.get<std::uint8_t>();
    if (code > 3) throw CheckpointError("unknown dtype code in entry " + e.name);
    e.dtype = static_cast<BlobDtype>(code);
    const auto rank = rd.get<std::uint8_t>();
    std::uint64_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      e.dims.push_back(rd.get<std::uint32_t>());
      numel *= e.dims.back();
    }
    e.offset = rd.get<std::uint64_t>();
    e.length = rd.get<std::uint64_t>();
    if (e.length != numel * dtype_size(e.dtype)) {
      throw CheckpointError("blob length disagrees with shape for " + e.name);
    }
    if (e.offset > blobs.size() || e.length > blobs.size() - e.offset) {
      throw CheckpointError("blob out of range for " + e.name);
    }
    if (!entries.emplace(e.name, e).second) throw CheckpointError("duplicate entry " + e.name);
  }
  if (!rd.done()) throw CheckpointError("trailing bytes in manifest");

  auto take = [&](const std::string& name) -> Entry {
    auto it = entries.find(name);
    if (it == entries.end()) throw CheckpointError("missing entry " + name);
    Entry e = it->second;
    entries.erase(it);
    return e;
  };

  const Entry cfg_entry = take("meta.config");
  if (cfg_entry.dtype != BlobDtype::Text) throw CheckpointError("meta.config must be text");
  const auto kv = parse_kv(blobs.substr(cfg_entry.offset, cfg_entry.length));
  ModelConfig mc;
  mc.input_dim = to_size(kv, "model.input_dim");
  mc.proj_dim = to_size(kv, "model.proj_dim");
  mc.hidden = to_size(kv, "model.hidden");
  mc.layers = to_size(kv, "model.layers");
  mc.bidirectional = to_size(kv, "model.bidirectional") != 0;
  mc.cls_hidden = to_size(kv, "model.cls_hidden");
  mc.tau = static_cast<std::uint32_t>(to_size(kv, "model.tau"));
  mc.lambda_cls = to_double(kv, "model.lambda_cls");
  mc.dropout_p = to_double(kv, "model.dropout_p");
  if (auto why = mc.invariant_violation(); !why.empty()) throw CheckpointError("config: " + why);

  ModelParameters<float> params(mc);
  params.window.n = to_size(kv, "window.n");
  params.window.r = to_size(kv, "window.r");
  params.window.stride = to_size(kv, "window.stride");

  for (const char* key : {"meta.norm.mean", "meta.norm.std"}) {
    const Entry e = take(key);
    if (e.dtype != BlobDtype::F64 || e.dims != std::vector<std::uint32_t>{kNumFeatures}) {
      throw CheckpointError(std::string("bad shape for ") + key);
    }
    auto& dst = std::string_view(key) == "meta.norm.mean" ? params.norm.mean : params.norm.stddev;
    for (std::size_t i = 0; i < kNumFeatures; ++i) dst[i] = read_f64(blobs.data() + e.offset + 8 * i);
  }

  for (auto& t : params.tensors()) {
    const Entry e = take(t.name);
    if (!std::equal(e.dims.begin(), e.dims.end(), t.shape.begin(), t.shape.end())) {
      throw CheckpointError("shape mismatch for " + t.name);
    }
    const char* p = blobs.data() + e.offset;
    if (e.dtype == BlobDtype::F32) {
      for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = std::bit_cast<float>(read_u32(p + 4 * i));
    } else if (e.dtype == BlobDtype::F16) {
      for (std::size_t i = 0; i < t.numel(); ++i) {
        const auto bits = static_cast<std::uint16_t>(static_cast<unsigned char>(p[2 * i]) |
                                                     (static_cast<unsigned char>(p[2 * i + 1]) << 8));
        t.data[i] = half_to_float(bits);
      }
    } else {
      throw CheckpointError("unsupported weight dtype for " + t.name);
    }
  }
  if (!entries.empty()) throw CheckpointError("unknown tensor " + entries.begin()->first);
  return params;
}

void save_checkpoint_file(const ModelParameters<float>& params, const std::string& path,
                          BlobDtype weight_dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  save_checkpoint(params, out, weight_dtype);
}

ModelParameters<float> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace latpred
