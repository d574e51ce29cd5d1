#include <doctest.h>

#include <cmath>

#include "latpred/train.hpp"
#include "test_util.hpp"

using namespace latpred;

namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.proj_dim = 6;
  m.hidden = 8;
  m.layers = 1;
  m.cls_hidden = 4;
  m.dropout_p = 0.0;
  return m;
}

WindowConfig tiny_window() {
  WindowConfig w;
  w.n = 12;
  w.r = 4;
  w.stride = 4;
  return w;
}

}  // namespace

TEST_CASE("dataset split is contiguous with floor sizes") {
  const auto recs = testutil::random_records(1000, 1, true);
  const auto s = split_dataset(recs, TrainSpec{});
  CHECK(s.train.size() == 800);
  CHECK(s.val.size() == 100);
  CHECK(s.holdout.size() == 100);
  CHECK(s.val_begin == 800);
  CHECK(s.holdout_begin == 900);
  CHECK(s.val.data() == recs.data() + 800);
  const auto odd = testutil::random_records(1005, 1, true);
  const auto t = split_dataset(odd, TrainSpec{});
  CHECK(t.train.size() == 805);
  CHECK(t.val.size() == 100);
  CHECK_THROWS_AS(split_dataset(recs, TrainSpec{}, 200), DataError);
}

TEST_CASE("constant zero target is learned") {
  auto recs = testutil::random_records(1200, 2, true);
  for (auto& r : recs) r.gt_cycles = 0;
  TrainSpec spec;
  spec.max_epochs = 20;
  spec.patience = 20;
  spec.lr = 1e-2;
  spec.batch_windows = 16;
  const auto res = train(recs, tiny_model(), tiny_window(), spec);
  const auto m = evaluate(res.params, split_dataset(recs, spec).holdout);
  CHECK(m.mae == 0.0);
  CHECK(m.acc_round == 1.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto recs = testutil::random_records(800, 3, true);
  for (auto& r : recs) r.gt_cycles %= 7;
  TrainSpec spec;
  spec.max_epochs = 2;
  spec.batch_windows = 8;
  auto mc = tiny_model();
  mc.dropout_p = 0.2;
  const auto a = train(recs, mc, tiny_window(), spec);
  const auto b = train(recs, mc, tiny_window(), spec);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].train_loss == b.history[i].train_loss);
  for (std::size_t t = 0; t < a.params.tensors().size(); ++t) {
    CHECK(a.params.tensors()[t].data == b.params.tensors()[t].data);
  }
  spec.seed = 99;
  const auto c = train(recs, mc, tiny_window(), spec);
  CHECK(c.history[0].train_loss != a.history[0].train_loss);
}

TEST_CASE("early stopping respects patience") {
  auto recs = testutil::random_records(600, 4, true);
  TrainSpec spec;
  spec.max_epochs = 30;
  spec.patience = 1;
  spec.lr = 0.0;
  const auto res = train(recs, tiny_model(), tiny_window(), spec);
  CHECK(res.history.size() == 2);
  CHECK(res.best_epoch == 1);
}

TEST_CASE("predictions cover stride-R windows") {
  auto recs = testutil::random_records(300, 5, true);
  const auto res = [&] {
    TrainSpec spec;
    spec.max_epochs = 1;
    return train(recs, tiny_model(), tiny_window(), spec);
  }();
  const auto p = predict_trace(res.params, recs);
  CHECK(p.first == 4);
  CHECK(p.y_hat.size() == p.y_true.size());
  CHECK(p.y_hat.size() % 4 == 0);
  CHECK(p.first + p.y_hat.size() <= recs.size() - 4);
  for (std::size_t i = 0; i < p.y_true.size(); ++i) {
    CHECK(p.y_true[i] == std::min<std::uint32_t>(recs[p.first + i].gt_cycles, 1000));
  }
  CHECK_THROWS_AS(predict_trace(res.params, std::span(recs).first(5)), DataError);
}

TEST_CASE("evaluation matrix shape") {
  std::vector<NamedTrace> traces;
  for (int i = 0; i < 2; ++i) {
    auto recs = testutil::random_records(500, 10 + i, true);
    for (auto& r : recs) r.gt_cycles %= 3;
    traces.push_back({"w" + std::to_string(i), recs});
  }
  TrainSpec spec;
  spec.max_epochs = 1;
  const auto m = eval_matrix(traces, tiny_model(), tiny_window(), spec);
  CHECK(m.sources == std::vector<std::string>{"w0", "w1"});
  REQUIRE(m.acc_round.size() == 2);
  for (const auto& row : m.acc_round) {
    REQUIRE(row.size() == 2);
    for (double v : row) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("annealed learning rate changes the trajectory after the first step") {
  auto recs = testutil::random_records(800, 6, true);
  for (auto& r : recs) r.gt_cycles %= 5;
  TrainSpec spec;
  spec.max_epochs = 2;
  spec.batch_windows = 8;
  const auto flat = train(recs, tiny_model(), tiny_window(), spec);
  spec.lr_final_fraction = 0.0;
  const auto annealed = train(recs, tiny_model(), tiny_window(), spec);
  CHECK(annealed.history[0].train_loss != flat.history[0].train_loss);
  CHECK(std::isfinite(annealed.history[1].train_loss));
}
