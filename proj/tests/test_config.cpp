#include <algorithm>

#include "doctest.h"
#include "ratio_forge/config.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/trace_io.hpp"
#include "support.hpp"

using namespace ratio_forge;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  RunConfig c;
  apply_config_text(c, "", "mem");
  CHECK(c.kalman().q() == 1e-6);
  CHECK(c.kalman().v() == 1.0);
  CHECK(c.kalman_for(Method::kKpoUnclipped).q() == 1e-4);
  CHECK(c.kalman_for(Method::kKpoClipped).q() == 1e-6);
  CHECK(c.clip_for(Method::kGrpo) == kGrpoClip);
  CHECK(c.clip_for(Method::kKpoUnclipped) == kKpoClip);
  CHECK(c.diagnostics().window == 50);
  CHECK_FALSE(c.diagnostics().kc.has_value());

  const TrainConfig t = c.train_config();
  CHECK(t.batch_size == 32);
  CHECK(t.group_size == 8);
  CHECK(t.learning_rate == 0.05);
  CHECK(t.steps == 300);
  CHECK(t.seed == 42);
  CHECK(t.clip == kKpoClip);
}

TEST_CASE("overrides") {
  RunConfig c;
  apply_config_text(c, R"({"kalman.q": 1e-4})", "mem");
  CHECK(c.kalman().q() == 1e-4);
  CHECK(c.kalman_for(Method::kKpoUnclipped).q() == 1e-4);

  RunConfig nested, dotted;
  apply_config_text(nested, R"({"kalman": {"q": 3e-5, "v": 2}, "train": {"method": "grpo", "steps": 7}})", "a");
  apply_config_text(dotted, R"({"kalman.q": 3e-5, "kalman.v": 2, "train.method": "grpo", "train.steps": 7})", "b");
  CHECK(nested.kalman() == dotted.kalman());
  CHECK(nested.train_config().method == Method::kGrpo);
  CHECK(dotted.train_config().steps == 7);
  CHECK(dotted.train_config().clip == kGrpoClip);

  c.set("diagnostics.kc", "12");
  CHECK(c.diagnostics().kc == 12u);
  c.set("diagnostics.kc", "null");
  CHECK_FALSE(c.diagnostics().kc.has_value());
  c.set("train.method", "kpo_unclipped");
  CHECK(c.train_config().kalman.q() == 1e-4);
  c.set("diagnostics.band", "exact");
  CHECK(c.diagnostics().band.is_exact());

  apply_config_text(c, "// comment\n{\"clip\": {\"kpo\": {\"eps_hi\": 0.001}}}", "mem");
  CHECK(c.clip_for(Method::kKpoClipped).eps_hi() == 0.001);
}

TEST_CASE("errors") {
  RunConfig c;
  try {
    apply_config_text(c, R"({"kalmn.q": 1e-4})", "mem");
    FAIL("expected an error");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("kalmn.q") != std::string::npos);
  }
  CHECK_THROWS_AS(c.set("kalman.q", "-1"), ParameterError);
  CHECK_THROWS_AS(c.set("train.steps", "\"many\""), ParameterError);
  CHECK_THROWS_AS(c.set("diagnostics.window", "1"), ParameterError);
  CHECK_THROWS_AS(c.set("train.method", "ppo"), ParameterError);

  try {
    apply_config_text(c, "{\n  \"kalman.q\": 1e-4,\n  oops\n}", "cfg.json");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text(c, "[1, 2]", "mem"), ParseError);
  CHECK_THROWS_AS(load_config(rf_test::scratch("missing.json")), IoError);
}

TEST_CASE("every documented key is settable") {
  const auto keys = config_keys();
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(std::find(keys.begin(), keys.end(), "kalman.q") != keys.end());
  CHECK(std::find(keys.begin(), keys.end(), "train.divergence_bound") != keys.end());
}

TEST_CASE("file loading") {
  const auto path = rf_test::scratch("cfg.json");
  write_text(path, R"({"train": {"seed": 7}, "objective.aggregation": "token_mean"})");
  const RunConfig c = load_config(path);
  CHECK(c.train_config().seed == 7);
  CHECK(c.aggregation == Aggregation::kTokenMean);
}

}  // TEST_SUITE
