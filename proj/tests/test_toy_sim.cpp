#include <array>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/toy_sim.hpp"
#include "support.hpp"
#include "toy_fixtures.hpp"

using namespace ratio_forge;
using doctest::Approx;

namespace {

constexpr Method kMethods[] = {Method::kGrpo, Method::kSeqLevel, Method::kKpoClipped,
                               Method::kKpoUnclipped};
constexpr GradientMode kModes[] = {GradientMode::kThroughFilter, GradientMode::kDetached};

TrainConfig small_config(Method m) {
  TrainConfig c;
  c.method = m;
  c.batch_size = 8;
  c.minibatch_size = 2;
  c.group_size = 4;
  c.max_len = 10;
  c.steps = 6;
  c.learning_rate = 0.5;
  c.kalman = m == Method::kKpoUnclipped ? KalmanParams(1e-4, 1.0) : KalmanParams();
  return c;
}

}  // namespace

TEST_SUITE("toy_sim") {

TEST_CASE("method names") {
  for (Method m : kMethods) CHECK(parse_method(to_string(m)) == m);
  for (GradientMode g : kModes) CHECK(parse_gradient_mode(to_string(g)) == g);
  CHECK_THROWS_AS(parse_method("ppo"), ParameterError);
  CHECK(default_clip(Method::kGrpo) == kGrpoClip);
  CHECK(default_clip(Method::kKpoClipped) == kKpoClip);
  CHECK(default_clip(Method::kSeqLevel) == kSeqLevelClip);
  CHECK_FALSE(is_clipped(Method::kKpoUnclipped));
}

TEST_CASE("verifier score") {
  const std::int64_t empty[] = {0};
  CHECK(verifier_score(std::span(empty, 0), 0, 8) == 1.0);
  const std::int64_t t[] = {3, 5};
  CHECK(verifier_score(t, 0, 8) == 1.0);
  CHECK(verifier_score(t, 1, 8) == 0.0);
  CHECK(ToyTask{8}.target_for(11) == 3);
}

TEST_CASE("policy rows are distributions") {
  ToyPolicy p(PolicyShape{.vocab_size = 6, .context_order = 2, .num_prompts = 3});
  auto g = rf_test::rng_for(41);
  for (double& x : p.parameters()) x = rf_test::uniform(g, -30.0, 30.0);
  std::vector<double> lp(6);
  for (std::size_t c = 0; c < p.num_contexts(); ++c) {
    p.log_softmax(c, lp);
    double sum = 0.0;
    for (double l : lp) sum += std::exp(l);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(p.entropy(c) >= 0.0);
    CHECK(p.entropy(c) <= std::log(6.0));
  }
  CHECK(p.num_contexts() == 3 * 7 * 7);
  CHECK_THROWS_AS(ToyPolicy(PolicyShape{.vocab_size = 1}), ParameterError);
}

TEST_CASE("sampling") {
  ToyPolicy sharp;
  for (std::size_t c = 0; c < sharp.num_contexts(); ++c) sharp.logits(c)[3] = 1e3;
  std::mt19937_64 g(7);
  const auto same = sample_group(sharp, 2, 8, 6, g, ToyTask{});
  for (const Rollout& r : same) {
    CHECK(r.trace.tokens == same[0].trace.tokens);
    CHECK(r.trace.tokens.size() == 6);
  }

  ToyPolicy p;
  auto rng = rf_test::rng_for(42);
  for (double& x : p.parameters()) x = rf_test::uniform(rng, -1.0, 1.0);
  std::mt19937_64 a(99), b(99);
  const auto ra = sample_group(p, 5, 8, 20, a, ToyTask{});
  const auto rb = sample_group(p, 5, 8, 20, b, ToyTask{});
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].trace == rb[i].trace);
    CHECK(ra[i].trace.logp_old == ra[i].trace.logp_new);
    CHECK(ra[i].trace.valid_count() == ra[i].trace.size());
    const auto& toks = ra[i].trace.tokens;
    CHECK((toks.back() == 0 || toks.size() == 20));
    CHECK(ra[i].trace.score == verifier_score(toks, 5 % 8, 8));
  }

  std::mt19937_64 c(1);
  CHECK_THROWS_AS(sample_group(p, 0, 1, 5, c, ToyTask{}), ParameterError);
}

TEST_CASE("uniform policy emits uniform unigrams") {
  const ToyPolicy uniform;
  std::mt19937_64 g(2024);
  std::array<double, 8> counts{};
  double total = 0.0;
  while (total < 1e5) {
    for (const Rollout& r : sample_group(uniform, 1, 8, 64, g, ToyTask{}))
      for (std::int64_t tok : r.trace.tokens) {
        counts[static_cast<std::size_t>(tok)] += 1.0;
        total += 1.0;
      }
  }
  const double sigma = std::sqrt(total * (1.0 / 8) * (7.0 / 8));
  for (double c : counts) CHECK(std::abs(c - total / 8) < 3.0 * sigma);
}

TEST_CASE("recompute log-probabilities") {
  ToyPolicy p;
  auto rng = rf_test::rng_for(43);
  for (double& x : p.parameters()) x = rf_test::uniform(rng, -1.0, 1.0);
  std::mt19937_64 g(3);
  auto group = sample_group(p, 3, 4, 10, g, ToyTask{});
  for (Rollout& r : group) {
    const auto before = r.trace.logp_new;
    recompute_logp(p, r);
    CHECK(r.trace.logp_new == before);
    CHECK(r.trace.logp_new == r.trace.logp_old);
  }

  const ToyPolicy uniform;
  for (Rollout& r : group) {
    recompute_logp(uniform, r);
    for (double lp : r.trace.logp_new) CHECK(lp == Approx(-std::log(8.0)).epsilon(1e-15));
  }

  group[0].trace.tokens[0] = 8;
  CHECK_THROWS_AS(recompute_logp(uniform, group[0]), InputError);
}

TEST_CASE("analytic gradient basics") {
  auto tb = rf_test::make_toy_batch(5, 0.0);
  const auto settings = rf_test::settings_for(Method::kGrpo, GradientMode::kThroughFilter);
  const auto grad = analytic_gradient(tb.policy, tb.batch, settings);

  // On-policy: sum of weighted advantage * grad log pi.
  std::vector<double> ref(tb.policy.num_parameters(), 0.0);
  const double responses = static_cast<double>(tb.batch.rollouts.size());
  std::vector<double> lp(8);
  for (std::size_t i = 0; i < tb.batch.rollouts.size(); ++i) {
    const Rollout& r = tb.batch.rollouts[i];
    const double w = tb.batch.advantages[i] / (responses * static_cast<double>(r.trace.size()));
    for (std::size_t t = 0; t < r.trace.size(); ++t) {
      const std::size_t ctx = tb.policy.context_index(r.prompt, std::span(r.trace.tokens).first(t));
      tb.policy.log_softmax(ctx, lp);
      for (std::size_t a = 0; a < 8; ++a)
        ref[ctx * 8 + a] += w * ((static_cast<std::int64_t>(a) == r.trace.tokens[t]) - std::exp(lp[a]));
    }
  }
  for (std::size_t j = 0; j < ref.size(); ++j) CHECK(grad[j] == Approx(ref[j]).epsilon(1e-12).scale(1e-12));

  auto zero = rf_test::make_toy_batch(6);
  std::fill(zero.batch.advantages.begin(), zero.batch.advantages.end(), 0.0);
  for (Method m : kMethods)
    for (GradientMode mode : kModes)
      for (double g : analytic_gradient(zero.policy, zero.batch, rf_test::settings_for(m, mode)))
        CHECK(g == 0.0);

  auto stale = rf_test::make_toy_batch(7);
  const Rollout& first = stale.batch.rollouts[0];
  stale.policy.logits(stale.policy.context_index(first.prompt, {}))[0] += 0.1;
  CHECK_THROWS_AS(analytic_gradient(stale.policy, stale.batch, settings), ContractViolation);
}

TEST_CASE("finite differences") {
  const std::vector<double> x{0.3, -1.2, 2.0, 0.7};
  const auto quad = [](std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i + 1.0) * v[i] * v[i] + 0.5 * v[i];
    return s;
  };
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] = 2.0 * (i + 1.0) * x[i] + 0.5;
  CHECK(finite_difference_check(quad, x, grad) < 1e-10);
  grad[2] += 1e-3;
  CHECK(finite_difference_check(quad, x, grad) > 1e-5);

  auto on = rf_test::make_toy_batch(8, 0.0);
  CHECK(finite_difference_check(on.policy, on.batch,
                                rf_test::settings_for(Method::kGrpo, GradientMode::kThroughFilter)) < 1e-4);

  for (Method m : kMethods)
    for (GradientMode mode : kModes) {
      CAPTURE(to_string(m));
      CAPTURE(to_string(mode));
      CHECK(rf_test::checked_fd(3, rf_test::settings_for(m, mode)) < 1e-4);
    }
}

TEST_CASE("gradient check flags clip-edge tokens") {
  auto tb = rf_test::make_toy_batch(9);
  auto settings = rf_test::settings_for(Method::kGrpo, GradientMode::kThroughFilter);
  // Put the clip edge exactly on the first token's ratio of some response.
  bool placed = false;
  for (std::size_t i = 0; i < tb.batch.rollouts.size() && !placed; ++i) {
    const double a = tb.batch.advantages[i];
    if (a == 0.0) continue;
    const double r = method_ratios(tb.batch.rollouts[i], settings)[0];
    const double eps = a > 0.0 ? r - 1.0 : 1.0 - r;
    if (eps <= 0.0) continue;
    settings.clip = a > 0.0 ? ClipConfig(0.2, eps) : ClipConfig(eps, 0.2);
    placed = true;
  }
  REQUIRE(placed);
  CHECK_THROWS_AS(finite_difference_check(tb.policy, tb.batch, settings), BoundaryTokenError);
}

TEST_CASE("filter path does not change the loss") {
  auto tb = rf_test::make_toy_batch(10);
  for (Method m : {Method::kKpoClipped, Method::kKpoUnclipped}) {
    const auto a = evaluate_objective(tb.batch, rf_test::settings_for(m, GradientMode::kThroughFilter));
    const auto b = evaluate_objective(tb.batch, rf_test::settings_for(m, GradientMode::kDetached));
    CHECK(a.loss == b.loss);
    CHECK(a.per_token_terms == b.per_token_terms);
  }
}

TEST_CASE("training runs") {
  SUBCASE("zero steps") {
    TrainConfig c = small_config(Method::kGrpo);
    c.steps = 0;
    CHECK(run_training(c).steps.empty());
  }
  SUBCASE("zero learning rate is a no-op") {
    TrainConfig c = small_config(Method::kKpoClipped);
    c.learning_rate = 0.0;
    const TrainMetrics m = run_training(c);
    REQUIRE(m.steps.size() == c.steps);
    for (const StepMetrics& s : m.steps) {
      CHECK(s.entropy == Approx(std::log(8.0)).epsilon(1e-14));
      CHECK(std::abs(s.pg_loss) < 1e-12);
      CHECK(s.clip_fraction == 0.0);
    }
    CHECK(run_training(c) == m);
  }
  SUBCASE("deterministic across runs and thread counts") {
    for (Method method : kMethods) {
      const TrainConfig c = small_config(method);
      const TrainMetrics a = run_training(c, 1);
      CHECK(run_training(c, 1) == a);
      CHECK(run_training(c, 3) == a);
      for (const StepMetrics& s : a.steps) {
        CHECK(s.reward_mean >= 0.0);
        CHECK(s.reward_mean <= 1.0);
        CHECK(s.entropy >= 0.0);
        CHECK(s.entropy <= std::log(8.0) + 1e-12);
        CHECK(s.clip_fraction >= 0.0);
        CHECK(s.clip_fraction <= 1.0);
      }
    }
  }
  SUBCASE("first minibatch of each step is on-policy") {
    const TrainConfig c = small_config(Method::kGrpo);
    std::size_t seen = 0;
    double later_drift = 0.0;
    run_training(c, 1, [&](const MinibatchView& v) {
      for (const Rollout& r : v.batch.rollouts)
        for (std::size_t t = 0; t < r.trace.size(); ++t) {
          const double ratio = std::exp(r.trace.logp_new[t] - r.trace.logp_old[t]);
          if (v.minibatch == 0) {
            CHECK(std::abs(ratio - 1.0) <= 1e-12);
            ++seen;
          } else {
            later_drift = std::max(later_drift, std::abs(ratio - 1.0));
          }
        }
    });
    CHECK(seen > 0);
    CHECK(later_drift > 1e-6);
  }
  SUBCASE("divergence guard halts with the partial timeline") {
    TrainConfig c = small_config(Method::kGrpo);
    c.learning_rate = 1e9;
    try {
      run_training(c);
      FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
      CHECK(e.step() == 0);
      CHECK(e.partial().steps.empty());
    }
  }
  SUBCASE("config validation") {
    TrainConfig c = small_config(Method::kGrpo);
    c.minibatch_size = 3;
    CHECK_THROWS_AS(run_training(c), ParameterError);
    c = small_config(Method::kGrpo);
    c.group_size = 1;
    CHECK_THROWS_AS(run_training(c), ParameterError);
  }
}

}  // TEST_SUITE
