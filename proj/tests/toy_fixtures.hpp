#pragma once

// Off-policy toy batches for gradient checks: sample under a random policy,
// then move the policy so every ratio drifts away from 1.

#include <random>

#include "ratio_forge/errors.hpp"
#include "ratio_forge/toy_sim.hpp"

namespace rf_test {

struct ToyBatch {
  ratio_forge::ToyPolicy policy;
  ratio_forge::Minibatch batch;
};

inline ToyBatch make_toy_batch(std::uint64_t seed, double drift = 0.05, std::size_t prompts = 4,
                               std::size_t group = 8, std::size_t max_len = 12) {
  using namespace ratio_forge;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), 0x70u};
  std::mt19937_64 g(seq);
  std::normal_distribution<double> init(0.0, 0.5), step(0.0, 1.0);

  ToyBatch out{ToyPolicy(PolicyShape{}), {}};
  for (double& x : out.policy.parameters()) x = init(g);
  const ToyTask task{out.policy.vocab_size()};
  for (std::size_t p = 0; p < prompts; ++p) {
    const int prompt = static_cast<int>(g() % static_cast<std::uint64_t>(out.policy.shape().num_prompts));
    for (Rollout& r : sample_group(out.policy, prompt, group, max_len, g, task))
      out.batch.rollouts.push_back(std::move(r));
  }
  for (double& x : out.policy.parameters()) x += drift * step(g);
  for (Rollout& r : out.batch.rollouts) recompute_logp(out.policy, r);
  out.batch.advantages = batch_advantages(out.batch.rollouts, group);
  return out;
}

// Gradient check on the first batch (by attempt) with no token near a clip edge.
inline double checked_fd(std::uint64_t seed, const ratio_forge::ObjectiveSettings& settings,
                         double drift = 0.05, int* attempts_used = nullptr) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    const ToyBatch b = make_toy_batch(seed * 1000 + static_cast<std::uint64_t>(attempt), drift);
    try {
      const double err = ratio_forge::finite_difference_check(b.policy, b.batch, settings, 1e-5);
      if (attempts_used != nullptr) *attempts_used = attempt + 1;
      return err;
    } catch (const ratio_forge::BoundaryTokenError&) {
    }
  }
  throw ratio_forge::BoundaryTokenError("no boundary-free batch found");
}

inline ratio_forge::ObjectiveSettings settings_for(ratio_forge::Method m,
                                                   ratio_forge::GradientMode mode) {
  ratio_forge::ObjectiveSettings s;
  s.method = m;
  s.gradient_mode = mode;
  s.clip = ratio_forge::default_clip(m);
  s.kalman = m == ratio_forge::Method::kKpoUnclipped ? ratio_forge::KalmanParams(1e-4, 1.0)
                                                     : ratio_forge::KalmanParams(1e-6, 1.0);
  return s;
}

}  // namespace rf_test
