#include <doctest.h>

#include <set>

#include "latpred/run_config.hpp"

using namespace latpred;

TEST_CASE("key/value parsing") {
  const auto kv = parse_kv_text("# comment\n\nseed = 7\n  window.n=64  # trailing\n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("seed") == "7");
  CHECK(kv.at("window.n") == "64");
  CHECK_THROWS_AS(parse_kv_text("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_kv_text("no equals sign\n"), ConfigError);
}

TEST_CASE("defaults applied from an empty document") {
  const auto cfg = apply_config({});
  CHECK(cfg.seed == 1);
  CHECK(cfg.window.n == WindowConfig{}.n);
  CHECK(cfg.model.hidden == ModelConfig{}.hidden);
  CHECK(cfg.train.lr == TrainSpec{}.lr);
  CHECK(cfg.deploy.overhead_budget == Rational(1, 1000));
}

TEST_CASE("every documented key is accepted with its default") {
  std::set<std::string> seen;
  std::map<std::string, std::string> all;
  for (const auto& k : config_keys()) {
    CHECK(seen.insert(k.key).second);
    CHECK_FALSE(k.help.empty());
    all[k.key] = k.default_value;
  }
  all.erase("sim.preset");
  all.erase("deploy.preset");
  for (auto it = all.begin(); it != all.end();) {
    if (it->second.empty()) {
      it = all.erase(it);
    } else {
      ++it;
    }
  }
  CHECK_NOTHROW(apply_config(all));
}

TEST_CASE("overrides and validation") {
  auto cfg = apply_config({{"sim.preset", "4w+mem"}, {"sim.rob_size", "99"}, {"model.hidden", "32"}});
  CHECK(cfg.sim.rob_size == 99);
  CHECK(cfg.sim.width == config_preset("4w+mem")->width);
  CHECK(cfg.model.hidden == 32);
  CHECK_THROWS_AS(apply_config({{"nope", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"window.n", "abc"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"window.r", "0"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"window.n", "10"}, {"window.r", "11"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"target.clip", "500"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"deploy.overhead_budget", "2"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"sim.preset", "nope"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"model.dropout_p", "1.0"}}), ConfigError);
  CHECK_THROWS_AS(apply_config({{"train.lr_final_fraction", "1.5"}}), ConfigError);
  CHECK(apply_config({{"train.lr_final_fraction", "0.1"}}).train.lr_final_fraction == 0.1);
}

TEST_CASE("stage seeds are distinct and reproducible") {
  const auto a = stage_seeds(1), b = stage_seeds(1), c = stage_seeds(2);
  CHECK(a.workload == b.workload);
  CHECK(a.train == b.train);
  CHECK(a.workload != a.train);
  CHECK(a.workload != c.workload);
  const auto cfg = apply_config({{"seed", "9"}});
  CHECK(cfg.workload.seed == stage_seeds(9).workload);
  CHECK(cfg.train.seed == stage_seeds(9).train);
}
