#include <doctest.h>

#include <cmath>

#include "latpred/features.hpp"
#include "latpred/rng.hpp"
#include "test_util.hpp"

using namespace latpred;

TEST_CASE("address split") {
  CHECK(addr_split(0) == AddrParts{0, 0, 0});
  CHECK(addr_split(1ull << 42) == AddrParts{1, 0, 0});
  CHECK(addr_split((5ull << 42) + (7ull << 20) + 9) == AddrParts{5, 7, 9});
  CHECK(addr_split(~0ull) == AddrParts{(1ull << 22) - 1, (1ull << 22) - 1, (1ull << 20) - 1});
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const auto a = rng.next_u64();
    const auto p = addr_split(a);
    REQUIRE((p.hi << 42) + (p.mid << 20) + p.lo == a);
  }
}

TEST_CASE("record encoding") {
  InstructionRecord r;
  r.pc = 0;
  const auto v = encode_record(r);
  for (int i = 0; i < 6; ++i) CHECK(v[i] == 0.0f);
  CHECK(v[6] == static_cast<float>(OpClass::Nop));
  for (int i = 7; i < 13; ++i) CHECK(v[i] == 255.0f);

  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const auto rec = testutil::random_record(rng, false);
    const auto f = encode_record(rec);
    for (float x : f) REQUIRE(std::fabs(x) < 8388608.0f);
    const auto pc = (static_cast<std::uint64_t>(f[0]) << 42) + (static_cast<std::uint64_t>(f[1]) << 20) +
                    static_cast<std::uint64_t>(f[2]);
    REQUIRE(pc == rec.pc);
    const auto mem = (static_cast<std::uint64_t>(f[3]) << 42) + (static_cast<std::uint64_t>(f[4]) << 20) +
                     static_cast<std::uint64_t>(f[5]);
    REQUIRE(mem == rec.mem_addr);
    REQUIRE(f[8] == static_cast<float>(rec.dst.index));
    REQUIRE(f[11] == static_cast<float>(static_cast<int>(rec.src2.reg_class)));
  }
}

TEST_CASE("normalization") {
  std::vector<FeatureVector> two(2);
  two[0].fill(3.0f);
  two[1].fill(3.0f);
  two[0][4] = 0.0f;
  two[1][4] = 2.0f;
  const auto s = fit_norm(two);
  CHECK(s.stddev[0] == NormStats::kMinStd);
  CHECK(apply_norm(s, two[0])[0] == 0.0f);
  CHECK(apply_norm(s, two[0])[4] == -1.0f);
  CHECK(apply_norm(s, two[1])[4] == 1.0f);
  CHECK_THROWS(fit_norm({}));

  const auto recs = testutil::random_records(5000, 31, false);
  std::vector<FeatureVector> feats;
  for (const auto& r : recs) feats.push_back(encode_record(r));
  const auto st = fit_norm(feats);
  for (std::size_t k = 0; k < kNumFeatures; ++k) {
    double mean = 0, sq = 0;
    for (const auto& f : feats) {
      const double z = apply_norm(st, f)[k];
      mean += z;
      sq += z * z;
    }
    mean /= double(feats.size());
    CHECK(std::fabs(mean) < 1e-5);  // float storage bounds this, not the statistic
    CHECK(std::sqrt(sq / double(feats.size())) == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("target transform") {
  CHECK(transform_target(0).z == 0.0);
  CHECK(transform_target(0).c == 0);
  CHECK(transform_target(5000).z == std::log(1001.0));
  CHECK(transform_target(5000).c == 1);
  CHECK(transform_target(10).c == 0);
  CHECK(transform_target(11).c == 1);
  CHECK(transform_target(3, {1000, 2}).c == 1);
  CHECK(invert_target(0.0) == 0);
  CHECK(invert_target(std::log(1001.0)) == 1000);
  CHECK(invert_target(50.0) == 1000);
  CHECK(invert_target(-3.0) == 0);
  for (std::uint32_t y = 0; y <= 1000; ++y) REQUIRE(invert_target(transform_target(y).z) == y);
  // also through float storage, as the network sees targets
  for (std::uint32_t y = 0; y <= 1000; ++y) {
    REQUIRE(invert_target(static_cast<float>(transform_target(y).z)) == y);
  }
}

TEST_CASE("window geometry") {
  std::vector<InstructionRecord> recs(1000);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].pc = i;
    recs[i].gt_cycles = static_cast<std::uint32_t>(i);
  }
  SUBCASE("N=10 R=4") {
    const auto w = build_windows(std::span(recs).first(10), WindowConfig{10, 4, 4});
    REQUIRE(w.size() == 1);
    CHECK(w[0].raw_y == std::vector<std::uint32_t>{3, 4, 5, 6});
  }
  SUBCASE("N=R has no context") {
    CHECK(WindowConfig{8, 8, 8}.left_context() == 0);
    const auto w = build_windows(std::span(recs).first(16), WindowConfig{8, 8, 8});
    REQUIRE(w.size() == 2);
    CHECK(w[1].raw_y.front() == 8);
  }
  SUBCASE("stride R tiles targets") {
    const auto w = build_windows(recs, WindowConfig{600, 200, 200});
    REQUIRE(w.size() == 3);
    std::vector<std::uint32_t> covered;
    for (const auto& win : w) covered.insert(covered.end(), win.raw_y.begin(), win.raw_y.end());
    REQUIRE(covered.size() == 600);
    for (std::size_t i = 0; i < covered.size(); ++i) REQUIRE(covered[i] == 200 + i);
    CHECK(w[2].start == 400);
  }
  SUBCASE("targets are clipped and labeled") {
    recs[500].gt_cycles = 7000;
    const auto w = build_windows(recs, WindowConfig{600, 200, 200});
    CHECK(w[1].raw_y[100] == 1000);
    CHECK(w[1].targets_c[100] == 1);
    CHECK(w[1].targets_z[100] == doctest::Approx(std::log(1001.0)));
    CHECK(w[0].targets_c[0] == 1);
  }
  CHECK_THROWS(build_windows(std::span(recs).first(9), WindowConfig{10, 4, 4}));
  CHECK_THROWS(window_starts(100, WindowConfig{10, 12, 4}));
  CHECK_THROWS(window_starts(100, WindowConfig{10, 4, 0}));
}
