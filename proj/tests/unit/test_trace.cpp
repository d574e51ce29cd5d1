#include <doctest.h>

#include <numeric>
#include <sstream>

#include "latpred/trace.hpp"
#include "test_util.hpp"

using namespace latpred;

namespace {

std::string serialize(const std::vector<InstructionRecord>& recs, bool labeled) {
  std::ostringstream os;
  write_trace(recs, labeled, os);
  return os.str();
}

Trace parse(const std::string& bytes) {
  std::istringstream is(bytes);
  return read_trace(is);
}

}  // namespace

TEST_CASE("empty trace is a bare header") {
  const auto bytes = serialize({}, false);
  CHECK(bytes.size() == 32);
  const auto t = parse(bytes);
  CHECK(t.records.empty());
  CHECK_FALSE(t.labeled);
}

TEST_CASE("record size is fixed at 32 bytes") {
  for (bool labeled : {false, true}) {
    CHECK(serialize(testutil::random_records(3, 5, labeled), labeled).size() == 128);
  }
  std::ostringstream os;
  CHECK(write_trace(testutil::random_records(17, 6, true), true, os) == 32 + 17 * 32);
}

TEST_CASE("write then read is the identity") {
  for (bool labeled : {false, true}) {
    const auto recs = testutil::random_records(1000, labeled ? 11 : 12, labeled);
    const auto t = parse(serialize(recs, labeled));
    CHECK(t.labeled == labeled);
    CHECK(t.records == recs);
  }
}

TEST_CASE("header fields are little-endian at fixed offsets") {
  const auto recs = testutil::random_records(2, 3, true);
  const auto b = serialize(recs, true);
  CHECK(b.substr(0, 4) == "NSTR");
  CHECK(static_cast<unsigned char>(b[4]) == 1);
  CHECK(static_cast<unsigned char>(b[6]) == 1);
  CHECK(static_cast<unsigned char>(b[8]) == 2);
  std::uint64_t pc = 0;
  for (int i = 0; i < 8; ++i) pc |= std::uint64_t(static_cast<unsigned char>(b[32 + i])) << (8 * i);
  CHECK(pc == recs[0].pc);
  for (int i = 20; i < 32; ++i) CHECK(b[i] == 0);
}

TEST_CASE("reader rejects malformed input") {
  auto bytes = serialize(testutil::random_records(4, 9, true), true);
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(parse(bytes), doctest::Contains("bad magic"), TraceError);
  }
  SUBCASE("unsupported version") {
    bytes[4] = 7;
    CHECK_THROWS_AS(parse(bytes), TraceError);
  }
  SUBCASE("truncated body") {
    bytes.resize(bytes.size() - 5);
    CHECK_THROWS_AS(parse(bytes), TraceError);
  }
  SUBCASE("record invariant") {
    bytes[32 + 24] = static_cast<char>(flags::kIsLoad | flags::kIsStore | flags::kHasMem);
    CHECK_THROWS_AS(parse(bytes), TraceError);
  }
}

TEST_CASE("writer rejects invalid records") {
  InstructionRecord r;
  r.mem_addr = 64;  // without has_mem
  std::ostringstream os;
  CHECK_THROWS_AS(write_trace(std::vector<InstructionRecord>{r}, false, os), TraceError);
}

TEST_CASE("epoch slicing drops the partial tail") {
  std::vector<InstructionRecord> recs(10);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].pc = i;
  const auto e = epoch_slice(recs, 3);
  REQUIRE(e.size() == 3);
  CHECK(e[2].back().pc == 8);
  CHECK(epoch_slice(std::vector<InstructionRecord>(99'999), 100'000).empty());
  CHECK(epoch_slice(std::vector<InstructionRecord>(250'003), 100'000).size() == 2);
}

TEST_CASE("epoch signatures") {
  CHECK(to_hex(epoch_signature({})) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  std::vector<InstructionRecord> one(1);
  one[0].pc = 0;
  CHECK(to_hex(epoch_signature(one)) ==
        "af5570f5a1810b7af78caf4bc70a660f0df51e42baf91d4de5b2328de0e83dfc");
  std::vector<InstructionRecord> two(2);
  two[0].pc = 0x400000;
  two[1].pc = 0x400004;
  CHECK(to_hex(epoch_signature(two)) ==
        "3ba02a8db4f65fa656b109a93f895c58c77fe5ab952ba0662d0322f8765f5b43");

  auto recs = testutil::random_records(200, 21, true);
  const auto base = epoch_signature(recs);
  auto other = recs;
  for (auto& r : other) {
    r.gt_cycles ^= 1;
    r.opclass = OpClass::Nop;
    r.dst = RegRef::integer(3);
  }
  CHECK(epoch_signature(other) == base);
  other[100].pc ^= 4;
  CHECK(epoch_signature(other) != base);
}

TEST_CASE("gt histogram") {
  auto make = [](std::vector<std::uint32_t> ys) {
    std::vector<InstructionRecord> v(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) v[i].gt_cycles = ys[i];
    return v;
  };
  const auto h = gt_histogram(make({0, 0, 1, 11}));
  CHECK(h.bins[0] == 0.5);
  CHECK(h.bins[1] == 0.25);
  CHECK(h.bins[11] == 0.25);
  CHECK(gt_histogram(make({0, 0, 0})).bins[0] == 1.0);
  CHECK(gt_histogram(make({5000})).bins[11] == 1.0);
  CHECK_THROWS(gt_histogram(std::vector<InstructionRecord>{}));

  const auto recs = testutil::random_records(5000, 4, true);
  const auto hr = gt_histogram(recs);
  CHECK(std::accumulate(hr.bins.begin(), hr.bins.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}
