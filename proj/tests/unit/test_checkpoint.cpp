#include <doctest.h>

#include <bit>
#include <cstring>
#include <cmath>
#include <sstream>

#include "latpred/checkpoint.hpp"
#include "latpred/rng.hpp"

using namespace latpred;

namespace {

ModelParameters<float> sample_params(bool bidir) {
  ModelConfig c;
  c.proj_dim = 16;
  c.hidden = bidir ? 8 : 12;
  c.bidirectional = bidir;
  c.cls_hidden = 7;
  c.lambda_cls = 0.3;
  c.tau = 12;
  auto p = init_params<float>(c, 42);
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    p.norm.mean[i] = 0.1 * double(i) + 1e-17;
    p.norm.stddev[i] = 1.0 / 3.0 + double(i);
  }
  p.window = {40, 10, 5};
  return p;
}

std::string save(const ModelParameters<float>& p, BlobDtype d) {
  std::ostringstream os;
  save_checkpoint(p, os, d);
  return os.str();
}

ModelParameters<float> load(const std::string& b) {
  std::istringstream is(b);
  return load_checkpoint(is);
}

}  // namespace

TEST_CASE("f32 checkpoints round-trip bit-exactly") {
  for (bool bidir : {false, true}) {
    const auto p = sample_params(bidir);
    const auto q = load(save(p, BlobDtype::F32));
    CHECK(q.config() == p.config());
    CHECK(q.window.n == 40);
    CHECK(q.window.stride == 5);
    CHECK(q.norm.mean == p.norm.mean);
    CHECK(q.norm.stddev == p.norm.stddev);
    REQUIRE(q.tensors().size() == p.tensors().size());
    for (std::size_t i = 0; i < p.tensors().size(); ++i) {
      CHECK(q.tensors()[i].name == p.tensors()[i].name);
      REQUIRE(std::memcmp(q.tensors()[i].data.data(), p.tensors()[i].data.data(),
                          p.tensors()[i].numel() * sizeof(float)) == 0);
    }
  }
}

TEST_CASE("f16 checkpoints store half-precision weights") {
  const auto p = sample_params(false);
  const auto b16 = save(p, BlobDtype::F16);
  CHECK(b16.size() < save(p, BlobDtype::F32).size());
  const auto q = load(b16);
  for (std::size_t i = 0; i < p.tensors().size(); ++i) {
    for (std::size_t k = 0; k < p.tensors()[i].numel(); ++k) {
      REQUIRE(q.tensors()[i].data[k] == half_to_float(float_to_half(p.tensors()[i].data[k])));
    }
  }
  // a second f16 round trip is exact
  const auto r = load(save(q, BlobDtype::F16));
  for (std::size_t i = 0; i < q.tensors().size(); ++i) REQUIRE(r.tensors()[i].data == q.tensors()[i].data);
}

TEST_CASE("half conversion") {
  CHECK(float_to_half(0.0f) == 0x0000);
  CHECK(float_to_half(-0.0f) == 0x8000);
  CHECK(float_to_half(1.0f) == 0x3C00);
  CHECK(float_to_half(-2.0f) == 0xC000);
  CHECK(float_to_half(65504.0f) == 0x7BFF);
  CHECK(float_to_half(65520.0f) == 0x7C00);  // rounds to infinity
  CHECK(float_to_half(1e-8f) == 0x0000);
  CHECK(float_to_half(5.960464477539063e-8f) == 0x0001);
  CHECK(half_to_float(0x0001) == 5.960464477539063e-8f);
  CHECK(half_to_float(0x3555) == doctest::Approx(0.333251953125));
  CHECK(std::isnan(half_to_float(float_to_half(std::nanf("")))));
  // every finite half survives the round trip
  for (std::uint32_t h = 0; h < 0x10000; ++h) {
    if ((h & 0x7C00) == 0x7C00) continue;
    REQUIRE(float_to_half(half_to_float(static_cast<std::uint16_t>(h))) == h);
  }
  // ties round to even
  CHECK(float_to_half(1.0f + 0x1.0p-11f) == 0x3C00);
  CHECK(float_to_half(1.0f + 3 * 0x1.0p-11f) == 0x3C02);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto good = save(sample_params(false), BlobDtype::F32);
  SUBCASE("magic") {
    auto b = good;
    b[1] = 'Z';
    CHECK_THROWS_AS(load(b), CheckpointError);
  }
  SUBCASE("truncated blobs") {
    CHECK_THROWS_AS(load(good.substr(0, good.size() - 3)), CheckpointError);
  }
  SUBCASE("tampered shape") {
    auto b = good;
    const auto pos = b.find("input_proj.weight");
    REQUIRE(pos != std::string::npos);
    // dtype, rank, then the first dim (16)
    const auto dim0 = pos + std::string("input_proj.weight").size() + 2;
    REQUIRE(static_cast<unsigned char>(b[dim0]) == 16);
    b[dim0] = 17;
    CHECK_THROWS_AS(load(b), CheckpointError);
  }
  SUBCASE("unknown tensor name") {
    auto b = good;
    const auto pos = b.find("cls_fc2.bias");
    b[pos] = 'k';
    CHECK_THROWS_AS(load(b), CheckpointError);
  }
}
