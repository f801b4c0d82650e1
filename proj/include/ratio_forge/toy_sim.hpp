#pragma once

// Desk-scale policy-optimization simulator. Each step samples a batch of
// prompt groups under the current (behavior) policy, then makes one gradient
// ascent update per minibatch. Only the first minibatch of a step is
// on-policy; later minibatches reuse stale samples, so their ratios drift.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "ratio_forge/errors.hpp"
#include "ratio_forge/objectives.hpp"
#include "ratio_forge/ratio_filter.hpp"
#include "ratio_forge/toy_policy.hpp"
#include "ratio_forge/trace.hpp"

namespace ratio_forge {

enum class Method { kGrpo, kSeqLevel, kKpoClipped, kKpoUnclipped };
enum class GradientMode { kThroughFilter, kDetached };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);
std::string_view to_string(GradientMode m);
GradientMode parse_gradient_mode(std::string_view text);

// Symmetric 0.2 for GRPO, (0.0003, 0.0004) for the sequence-level and KPO methods.
ClipConfig default_clip(Method m);

bool is_clipped(Method m);

// Modular-sum task: a response succeeds iff the sum of its token ids is
// congruent to the prompt's target modulo the vocabulary size.
struct ToyTask {
  int vocab_size = 8;
  int target_for(int prompt) const { return prompt % vocab_size; }
};

double verifier_score(std::span<const std::int64_t> tokens, int target, int vocab_size);

struct Rollout {
  int prompt = 0;
  TokenTrace trace;
};

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Samples `group_size` responses for one prompt until EOS or max_len tokens.
// logp_old = logp_new = log-probabilities under `policy`; scores filled from `task`.
std::vector<Rollout> sample_group(const ToyPolicy& policy, int prompt, std::size_t group_size,
                                  std::size_t max_len, std::mt19937_64& rng,
                                  const ToyTask& task);

// Overwrites trace.logp_new with log-probabilities under `policy`.
void recompute_logp(const ToyPolicy& policy, Rollout& rollout);

struct ObjectiveSettings {
  Method method = Method::kKpoClipped;
  GradientMode gradient_mode = GradientMode::kThroughFilter;
  ClipConfig clip = kKpoClip;
  KalmanParams kalman;
  Aggregation aggregation = Aggregation::kSeqMeanTokenMean;
  double saturation_bound = kDefaultSaturationBound;
};

// Rollouts scored and normalized within their groups; advantages[i] belongs to rollouts[i].
struct Minibatch {
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;
};

// Group-relative advantages for consecutive groups of `group_size` rollouts.
std::vector<double> batch_advantages(std::span<const Rollout> rollouts, std::size_t group_size,
                                     std::size_t* degenerate_groups = nullptr);

// Per-token ratios the method feeds into its surrogate (raw, sequence-level
// constant or Kalman-filtered), computed from trace.logp_new - trace.logp_old.
std::vector<double> method_ratios(const Rollout& rollout, const ObjectiveSettings& settings);

ObjectiveReport evaluate_objective(const Minibatch& batch, const ObjectiveSettings& settings);

// Gradient of the objective w.r.t. every policy logit. Throws ContractViolation if
// any trace's logp_new differs from the log-probabilities under `policy`.
std::vector<double> analytic_gradient(const ToyPolicy& policy, const Minibatch& batch,
                                      const ObjectiveSettings& settings);

// Central-difference comparison. Returns max |analytic - numeric| / (|numeric| + 1e-8)
// over `indices` (all coordinates when empty).
double finite_difference_check(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, std::span<const double> analytic,
                               double h = 1e-5, std::span<const std::size_t> indices = {});

// Same check against the simulator objective. Stop-gradient quantities (the
// sequence-level ratio, detached filtered ratios) are frozen at `policy`.
// Throws BoundaryTokenError when a token lies within reach of a clip edge.
double finite_difference_check(const ToyPolicy& policy, const Minibatch& batch,
                               const ObjectiveSettings& settings, double h = 1e-5,
                               std::span<const std::size_t> indices = {});

struct TrainConfig {
  std::size_t batch_size = 32;     // prompts per step
  std::size_t minibatch_size = 8;  // prompts per update
  std::size_t group_size = 8;      // responses per prompt
  std::size_t max_len = 32;
  Method method = Method::kKpoClipped;
  KalmanParams kalman;
  std::optional<ClipConfig> clip;  // unset: default_clip(method)
  double learning_rate = 0.05;
  std::size_t steps = 300;
  std::uint64_t seed = 42;
  GradientMode gradient_mode = GradientMode::kThroughFilter;
  Aggregation aggregation = Aggregation::kSeqMeanTokenMean;
  PolicyShape policy;
  double saturation_bound = kDefaultSaturationBound;
  double divergence_bound = 1e6;

  void validate() const;
  ObjectiveSettings objective_settings() const;
};

struct StepMetrics {
  std::size_t step = 0;
  double reward_mean = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double pg_loss = 0.0;  // negated objective, averaged over the step's minibatches

  friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

struct TrainMetrics {
  std::vector<StepMetrics> steps;
  friend bool operator==(const TrainMetrics&, const TrainMetrics&) = default;
};

class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(std::size_t step, double magnitude, TrainMetrics partial)
      : DivergenceError(step, magnitude), partial_(std::move(partial)) {}
  const TrainMetrics& partial() const { return partial_; }

 private:
  TrainMetrics partial_;
};

// Called after each minibatch's ratios are formed, before the update.
struct MinibatchView {
  std::size_t step;
  std::size_t minibatch;
  const Minibatch& batch;
  const ObjectiveReport& report;
};
using MinibatchObserver = std::function<void(const MinibatchView&)>;

TrainMetrics run_training(const TrainConfig& config, unsigned threads = 1,
                          const MinibatchObserver& observer = {});

}  // namespace ratio_forge
