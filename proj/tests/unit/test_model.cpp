#include <doctest.h>

#include <cmath>

#include "../oracles/gradcheck.hpp"
#include "../oracles/inventory.hpp"
#include "../oracles/oracles.hpp"
#include "latpred/model.hpp"
#include "latpred/rng.hpp"

using namespace latpred;

namespace {

ModelConfig toy(std::size_t hidden, std::size_t layers, bool bidir) {
  ModelConfig c;
  c.proj_dim = 6;
  c.hidden = hidden;
  c.layers = layers;
  c.bidirectional = bidir;
  c.cls_hidden = 5;
  return c;
}

template <typename T>
std::vector<T> random_input(std::size_t b, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<T> x(b * n * kNumFeatures);
  for (auto& v : x) v = static_cast<T>(rng.uniform(-2, 2));
  return x;
}

}  // namespace

TEST_CASE("default parameter inventory") {
  const ModelParameters<float> p(ModelConfig{});
  const auto& inv = oracle::default_inventory();
  REQUIRE(p.tensors().size() == inv.size());
  for (std::size_t i = 0; i < inv.size(); ++i) {
    CHECK(p.tensors()[i].name == inv[i].name);
    CHECK(p.tensors()[i].shape == inv[i].shape);
    CHECK(p.tensors()[i].numel() == inv[i].count);
  }
  CHECK(p.param_count() == oracle::kDefaultTotal);
}

TEST_CASE("parameter counts match the closed form") {
  for (bool bidir : {false, true}) {
    for (std::size_t layers : {1, 2, 3}) {
      ModelConfig c;
      c.hidden = bidir ? 128 : 64;
      c.layers = layers;
      c.bidirectional = bidir;
      CHECK(ModelParameters<float>(c).param_count() ==
            oracle::closed_form_count(c.proj_dim, c.hidden, layers, bidir, c.cls_hidden));
    }
  }
  ModelConfig bi;
  bi.bidirectional = true;
  bi.hidden = 128;
  const ModelParameters<float> p(bi);
  CHECK(p.find("rnn.weight_hh_l1_reverse") != nullptr);
  CHECK(p.find("rnn.weight_ih_l1")->shape == std::vector<std::size_t>{512, 256});
}

TEST_CASE("initialization") {
  const auto a = init_params<float>(ModelConfig{}, 5);
  const auto b = init_params<float>(ModelConfig{}, 5);
  const auto c = init_params<float>(ModelConfig{}, 6);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    same = same && a.tensors()[i].data == b.tensors()[i].data;
    differs = differs || a.tensors()[i].data != c.tensors()[i].data;
  }
  CHECK(same);
  CHECK(differs);
  const auto& bih = a.find("rnn.bias_ih_l0")->data;
  for (std::size_t j = 0; j < 1024; ++j) REQUIRE(bih[j] == ((j >= 256 && j < 512) ? 1.0f : 0.0f));
  for (float v : a.find("rnn.bias_hh_l0")->data) REQUIRE(v == 0.0f);
  const float k = 1.0f / 16.0f;
  for (float v : a.find("rnn.weight_hh_l1")->data) REQUIRE(std::fabs(v) <= k);
  CHECK_THROWS(ModelParameters<float>(ModelConfig{13, 256, 256, 4}));
}

TEST_CASE("zero network predicts zero") {
  ModelParameters<float> p(ModelConfig{});
  ForwardCache<float> cache;
  const auto x = random_input<float>(2, 20, 1);
  const auto pred = predict(p, std::span<const float>(x), 2, 20, 6, cache);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(pred.z_hat[i] == 0.0f);
    CHECK(pred.logits[2 * i] == 0.0f);
    CHECK(pred.c_hat[i] == 0);
    CHECK(pred.y_hat[i] == 0);
  }
}

TEST_CASE("forward matches a hand-unrolled recurrence") {
  for (bool bidir : {false, true}) {
    for (std::size_t layers : {1, 2, 3}) {
      CAPTURE(bidir);
      CAPTURE(layers);
      const auto cfg = toy(4, layers, bidir);
      auto p = init_params<double>(cfg, 3 + layers);
      Rng rng(9);
      for (auto& t : p.tensors()) {
        for (auto& v : t.data) v += rng.uniform(-0.5, 0.5);
      }
      const std::size_t B = 3, N = 9, R = 3;
      const auto x = random_input<double>(B, N, 4);
      ForwardCache<double> cache;
      const auto& h = forward(p, std::span<const double>(x), B, N, R, cache);
      const auto ref = oracle::forward(p, x, B, N, R);
      for (std::size_t i = 0; i < B * R; ++i) {
        REQUIRE(h.z_short[i] == doctest::Approx(ref.z_short[i]).epsilon(1e-12));
        REQUIRE(h.z_long[i] == doctest::Approx(ref.z_long[i]).epsilon(1e-12));
        REQUIRE(h.logits[2 * i] == doctest::Approx(ref.logits[2 * i]).epsilon(1e-12));
        REQUIRE(h.logits[2 * i + 1] == doctest::Approx(ref.logits[2 * i + 1]).epsilon(1e-12));
      }
      // float path against the same oracle
      const auto pf = p.cast<float>();
      std::vector<float> xf(x.begin(), x.end());
      ForwardCache<float> cf;
      const auto& hf = forward(pf, std::span<const float>(xf), B, N, R, cf);
      for (std::size_t i = 0; i < B * R; ++i) {
        REQUIRE(std::fabs(hf.z_short[i] - ref.z_short[i]) < 1e-5);
        REQUIRE(std::fabs(hf.logits[2 * i + 1] - ref.logits[2 * i + 1]) < 1e-5);
      }
    }
  }
}

TEST_CASE("batch rows are independent and permutable") {
  const auto cfg = toy(8, 2, false);
  const auto p = init_params<float>(cfg, 1);
  const std::size_t N = 10, R = 4, F = kNumFeatures;
  const auto x = random_input<float>(3, N, 2);
  std::vector<float> perm(x.size());
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t b = 0; b < 3; ++b) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(order[b] * N * F), N * F,
                perm.begin() + static_cast<std::ptrdiff_t>(b * N * F));
  }
  ForwardCache<float> c1, c2;
  const auto a = forward(p, std::span<const float>(x), 3, N, R, c1);
  const auto b = forward(p, std::span<const float>(perm), 3, N, R, c2);
  for (std::size_t bi = 0; bi < 3; ++bi) {
    for (std::size_t t = 0; t < R; ++t) {
      REQUIRE(b.z_long[bi * R + t] == a.z_long[order[bi] * R + t]);
    }
  }
  // identical windows give identical rows
  std::vector<float> twin(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(N * F));
  twin.insert(twin.end(), twin.begin(), twin.end());
  ForwardCache<float> c3;
  const auto t = forward(p, std::span<const float>(twin), 2, N, R, c3);
  for (std::size_t i = 0; i < R; ++i) CHECK(t.z_short[i] == t.z_short[R + i]);
}

TEST_CASE("unidirectional outputs ignore inputs after the target segment") {
  for (bool bidir : {false, true}) {
    const auto cfg = toy(6, 2, bidir);
    const auto p = init_params<float>(cfg, 4);
    const std::size_t N = 12, R = 4;  // s = 4, targets 4..7
    auto x = random_input<float>(1, N, 8);
    ForwardCache<float> cache;
    const auto before = forward(p, std::span<const float>(x), 1, N, R, cache);
    for (std::size_t t = 8; t < N; ++t) x[t * kNumFeatures + 3] += 5.0f;
    const auto after = forward(p, std::span<const float>(x), 1, N, R, cache);
    bool changed = false;
    for (std::size_t i = 0; i < R; ++i) changed = changed || before.z_short[i] != after.z_short[i];
    CHECK(changed == bidir);
  }
}

TEST_CASE("argmax is shift invariant and ties go to class 0") {
  auto p = ModelParameters<float>(toy(4, 1, false));
  ForwardCache<float> cache;
  const auto x = random_input<float>(1, 4, 3);
  p.tensors()[p.fc2_b].data = {0.5f, 0.5f};
  CHECK(predict(p, std::span<const float>(x), 1, 4, 2, cache).c_hat[0] == 0);
  p.tensors()[p.fc2_b].data = {0.5f, 0.75f};
  p.tensors()[p.long_b].data = {2.0f};
  const auto a = predict(p, std::span<const float>(x), 1, 4, 2, cache);
  CHECK(a.c_hat[0] == 1);
  CHECK(a.y_hat[0] == 6);  // round(e^2 - 1)
  p.tensors()[p.fc2_b].data = {100.5f, 100.75f};
  CHECK(predict(p, std::span<const float>(x), 1, 4, 2, cache).c_hat == a.c_hat);
}

TEST_CASE("loss values") {
  HeadOutputs<double> h;
  h.batch = 1;
  h.r = 4;
  h.z_short = {1.5, 2.5, 0.0, 0.0};
  h.z_long = {9.0, 9.0, 3.5, 4.5};
  h.logits = {50, -50, 50, -50, -50, 50, -50, 50};
  const std::vector<float> z = {1.0f, 2.0f, 3.0f, 4.0f};
  const std::vector<std::uint8_t> c = {0, 0, 1, 1};
  const auto l = loss(h, z, c, HeadMask::Teacher, 1.0);
  CHECK(l.reg == doctest::Approx(0.125));
  CHECK(l.cls < 1e-20);
  CHECK(l.total == doctest::Approx(0.125));
  const auto lp = loss(h, z, c, HeadMask::Predicted, 1.0);
  CHECK(lp.reg == doctest::Approx(0.125));

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    h.batch = 2;
    h.r = 3;
    h.z_short.resize(6);
    h.z_long.resize(6);
    h.logits.resize(12);
    std::vector<float> zz(6);
    std::vector<std::uint8_t> cc(6), pred_mask(6);
    for (auto& v : h.z_short) v = rng.uniform(-3, 3);
    for (auto& v : h.z_long) v = rng.uniform(-3, 3);
    for (auto& v : h.logits) v = rng.uniform(-4, 4);
    for (auto& v : zz) v = static_cast<float>(rng.uniform(0, 5));
    for (auto& v : cc) v = static_cast<std::uint8_t>(rng.below(2));
    for (std::size_t i = 0; i < 6; ++i) pred_mask[i] = h.logits[2 * i + 1] > h.logits[2 * i];
    oracle::NaiveOutputs o{h.z_short, h.z_long, h.logits};
    const double lam = rng.uniform(0, 2);
    CHECK(loss(h, zz, cc, HeadMask::Teacher, lam).total ==
          doctest::Approx(oracle::joint_loss(o, zz, cc, cc, lam)).epsilon(1e-12));
    CHECK(loss(h, zz, cc, HeadMask::Predicted, lam).total ==
          doctest::Approx(oracle::joint_loss(o, zz, cc, pred_mask, lam)).epsilon(1e-12));
  }
}

TEST_CASE("gradients match finite differences") {
  for (const auto& gc : oracle::toy_cases()) {
    const auto r = oracle::grad_check(gc);
    CAPTURE(r.worst_tensor);
    CHECK(r.worst_rel < 1e-4);
    CHECK(r.checked > 100);
  }
}

TEST_CASE("classifier gradients scale with lambda") {
  const auto cfg = toy(4, 1, false);
  auto p = init_params<double>(cfg, 2);
  const std::size_t N = 6, R = 2;
  const auto x = random_input<double>(1, N, 5);
  ForwardCache<double> cache;
  const auto& h = forward(p, std::span<const double>(x), 1, N, R, cache);
  // targets equal to the selected head output make the regression term zero
  std::vector<std::uint8_t> c = {0, 1};
  std::vector<float> z = {static_cast<float>(h.z_short[0]), static_cast<float>(h.z_long[1])};
  p.tensors()[p.short_b].data[0] += static_cast<double>(z[0]) - h.z_short[0];
  p.tensors()[p.long_b].data[0] += static_cast<double>(z[1]) - h.z_long[1];
  ModelParameters<double> g1, g2;
  forward(p, std::span<const double>(x), 1, N, R, cache);
  const auto l1 = backward(p, cache, z, c, 1.0, g1);
  forward(p, std::span<const double>(x), 1, N, R, cache);
  backward(p, cache, z, c, 2.0, g2);
  CHECK(l1.reg < 1e-12);
  for (std::size_t i : {p.fc1_w, p.fc2_w, p.fc2_b}) {
    for (std::size_t k = 0; k < g1.tensors()[i].data.size(); ++k) {
      REQUIRE(g2.tensors()[i].data[k] == doctest::Approx(2 * g1.tensors()[i].data[k]).epsilon(1e-9));
    }
  }
  for (double v : g1.tensors()[p.short_w].data) REQUIRE(std::fabs(v) < 1e-9);
}

TEST_CASE("zero gradient at an exact minimum") {
  const auto cfg = toy(4, 1, false);
  ModelParameters<double> p(cfg);
  p.tensors()[p.fc2_b].data = {40.0, -40.0};
  ForwardCache<double> cache;
  const auto x = random_input<double>(2, 5, 1);
  forward(p, std::span<const double>(x), 2, 5, 3, cache);
  std::vector<float> z(6, 0.0f);
  std::vector<std::uint8_t> c(6, 0);
  ModelParameters<double> g;
  const auto l = backward(p, cache, z, c, 1.0, g);
  CHECK(l.total < 1e-30);
  for (const auto& t : g.tensors()) {
    double sq = 0;
    for (double v : t.data) sq += v * v;
    CHECK(std::sqrt(sq) < 1e-8);
  }
}
