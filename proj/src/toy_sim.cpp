#include "ratio_forge/toy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ratio_forge/parallel.hpp"

namespace ratio_forge {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kGrpo:
      return "grpo";
    case Method::kSeqLevel:
      return "seq_level";
    case Method::kKpoClipped:
      return "kpo_clipped";
    case Method::kKpoUnclipped:
      return "kpo_unclipped";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::kGrpo, Method::kSeqLevel, Method::kKpoClipped, Method::kKpoUnclipped})
    if (text == to_string(m)) return m;
  throw ParameterError("unknown method '" + std::string(text) +
                       "' (expected grpo, seq_level, kpo_clipped or kpo_unclipped)");
}

std::string_view to_string(GradientMode m) {
  return m == GradientMode::kThroughFilter ? "through_filter" : "detached";
}

GradientMode parse_gradient_mode(std::string_view text) {
  if (text == "through_filter") return GradientMode::kThroughFilter;
  if (text == "detached") return GradientMode::kDetached;
  throw ParameterError("unknown gradient mode '" + std::string(text) + "'");
}

ClipConfig default_clip(Method m) {
  switch (m) {
    case Method::kGrpo:
      return kGrpoClip;
    case Method::kSeqLevel:
      return kSeqLevelClip;
    case Method::kKpoClipped:
    case Method::kKpoUnclipped:
      return kKpoClip;
  }
  return kGrpoClip;
}

bool is_clipped(Method m) { return m != Method::kKpoUnclipped; }

double verifier_score(std::span<const std::int64_t> tokens, int target, int vocab_size) {
  std::int64_t sum = 0;
  for (std::int64_t t : tokens) sum = (sum + t) % vocab_size;
  return sum == target % vocab_size ? 1.0 : 0.0;
}

std::vector<Rollout> sample_group(const ToyPolicy& policy, int prompt, std::size_t group_size,
                                  std::size_t max_len, std::mt19937_64& rng,
                                  const ToyTask& task) {
  if (group_size < 2) throw ParameterError("group size must be >= 2");
  const auto vocab = static_cast<std::size_t>(policy.vocab_size());
  const std::int64_t eos = policy.shape().eos_token;
  std::vector<double> lp(vocab);
  std::vector<Rollout> out(group_size);
  for (std::size_t g = 0; g < group_size; ++g) {
    Rollout& r = out[g];
    r.prompt = prompt;
    TokenTrace& tr = r.trace;
    tr.group_id = "prompt-" + std::to_string(prompt);
    tr.sample_id = tr.group_id + "-" + std::to_string(g);
    while (tr.tokens.size() < max_len) {
      policy.log_softmax(policy.context_index(prompt, tr.tokens), lp);
      const double u = unit_uniform(rng);
      std::size_t pick = vocab;
      double cum = 0.0;
      for (std::size_t a = 0; a < vocab; ++a) {
        const double p = std::exp(lp[a]);
        if (p <= 0.0) continue;
        cum += p;
        pick = a;
        if (u < cum) break;
      }
      tr.tokens.push_back(static_cast<std::int64_t>(pick));
      tr.logp_old.push_back(lp[pick]);
      if (static_cast<std::int64_t>(pick) == eos) break;
    }
    tr.logp_new = tr.logp_old;
    tr.mask.assign(tr.tokens.size(), true);
    tr.score = verifier_score(tr.tokens, task.target_for(prompt), task.vocab_size);
  }
  return out;
}

void recompute_logp(const ToyPolicy& policy, Rollout& rollout) {
  TokenTrace& tr = rollout.trace;
  std::vector<double> lp(static_cast<std::size_t>(policy.vocab_size()));
  tr.logp_new.resize(tr.tokens.size());
  for (std::size_t t = 0; t < tr.tokens.size(); ++t) {
    const std::int64_t tok = tr.tokens[t];
    if (tok < 0 || tok >= policy.vocab_size())
      throw InputError("trace '" + tr.sample_id + "': token " + std::to_string(tok) +
                       " outside the vocabulary");
    if (!tr.mask[t]) continue;
    policy.log_softmax(policy.context_index(rollout.prompt, std::span(tr.tokens).first(t)), lp);
    tr.logp_new[t] = lp[static_cast<std::size_t>(tok)];
  }
}

std::vector<double> batch_advantages(std::span<const Rollout> rollouts, std::size_t group_size,
                                     std::size_t* degenerate_groups) {
  if (group_size < 2 || rollouts.size() % group_size != 0)
    throw InputError("rollouts do not split into groups of " + std::to_string(group_size));
  std::vector<double> out(rollouts.size());
  std::vector<double> scores(group_size);
  std::size_t degenerate = 0;
  for (std::size_t g = 0; g < rollouts.size(); g += group_size) {
    for (std::size_t i = 0; i < group_size; ++i) scores[i] = rollouts[g + i].trace.score;
    const AdvantageSet adv = group_relative_advantage(scores);
    degenerate += adv.degenerate ? 1 : 0;
    std::copy(adv.per_response.begin(), adv.per_response.end(), out.begin() + static_cast<std::ptrdiff_t>(g));
  }
  if (degenerate_groups != nullptr) *degenerate_groups = degenerate;
  return out;
}

std::vector<double> method_ratios(const Rollout& rollout, const ObjectiveSettings& settings) {
  const LogRatioSeries z = compute_log_ratios(rollout.trace);
  switch (settings.method) {
    case Method::kGrpo: {
      std::vector<double> r(z.size(), 1.0);
      for (std::size_t t = 0; t < z.size(); ++t)
        if (z.mask[t]) r[t] = std::exp(z.values[t]);
      return r;
    }
    case Method::kSeqLevel: {
      const bool any = std::find(z.mask.begin(), z.mask.end(), true) != z.mask.end();
      return std::vector<double>(z.size(), any ? sequence_ratio_geometric(z) : 1.0);
    }
    case Method::kKpoClipped:
    case Method::kKpoUnclipped:
      return to_ratio_space(kalman_filter_sequence(z, settings.kalman), settings.saturation_bound);
  }
  return {};
}

ObjectiveReport evaluate_objective(const Minibatch& batch, const ObjectiveSettings& settings) {
  if (batch.advantages.size() != batch.rollouts.size())
    throw InputError("one advantage per rollout required");
  std::vector<std::vector<double>> ratios;
  ratios.reserve(batch.rollouts.size());
  for (const Rollout& r : batch.rollouts) ratios.push_back(method_ratios(r, settings));
  std::vector<SurrogateInput> inputs;
  inputs.reserve(batch.rollouts.size());
  for (std::size_t i = 0; i < batch.rollouts.size(); ++i)
    inputs.push_back({ratios[i], &batch.rollouts[i].trace.mask, batch.advantages[i]});
  return surrogate_objective(inputs, is_clipped(settings.method) ? &settings.clip : nullptr,
                             settings.aggregation);
}

namespace {

// Weight of one valid token of rollout i in the aggregated objective.
std::vector<double> token_weights(const Minibatch& batch, Aggregation mode) {
  std::vector<double> w(batch.rollouts.size(), 0.0);
  std::size_t responses = 0;
  std::size_t tokens = 0;
  for (const Rollout& r : batch.rollouts) {
    const std::size_t n = r.trace.valid_count();
    tokens += n;
    responses += n > 0 ? 1 : 0;
  }
  for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
    const std::size_t n = batch.rollouts[i].trace.valid_count();
    if (n == 0) continue;
    w[i] = mode == Aggregation::kTokenMean
               ? 1.0 / static_cast<double>(tokens)
               : 1.0 / (static_cast<double>(responses) * static_cast<double>(n));
  }
  return w;
}

}  // namespace

std::vector<double> analytic_gradient(const ToyPolicy& policy, const Minibatch& batch,
                                      const ObjectiveSettings& settings) {
  if (batch.advantages.size() != batch.rollouts.size())
    throw InputError("one advantage per rollout required");
  const auto vocab = static_cast<std::size_t>(policy.vocab_size());
  std::vector<double> lp(vocab);

  for (const Rollout& r : batch.rollouts) {
    const TokenTrace& tr = r.trace;
    for (std::size_t t = 0; t < tr.size(); ++t) {
      if (!tr.mask[t]) continue;
      policy.log_softmax(policy.context_index(r.prompt, std::span(tr.tokens).first(t)), lp);
      if (lp[static_cast<std::size_t>(tr.tokens[t])] != tr.logp_new[t])
        throw ContractViolation("trace '" + tr.sample_id +
                                "': logp_new is stale; recompute it under the current policy");
    }
  }

  const std::vector<double> weights = token_weights(batch, settings.aggregation);
  std::vector<double> grad(policy.num_parameters(), 0.0);

  for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const Rollout& r = batch.rollouts[i];
    const TokenTrace& tr = r.trace;
    const double adv = batch.advantages[i];
    const std::vector<double> values = method_ratios(r, settings);
    const std::size_t n = tr.size();

    // dJ_i / dz_s before aggregation weighting.
    std::vector<double> dz(n, 0.0);
    switch (settings.method) {
      case Method::kGrpo:
      case Method::kSeqLevel:
        for (std::size_t t = 0; t < n; ++t)
          if (tr.mask[t]) dz[t] = token_pg_coefficient(values[t], adv, settings.clip);
        break;
      case Method::kKpoClipped:
      case Method::kKpoUnclipped: {
        std::vector<double> drho(n, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
          if (!tr.mask[t]) continue;
          drho[t] = settings.method == Method::kKpoClipped
                        ? token_pg_coefficient(values[t], adv, settings.clip)
                        : values[t] * adv;
        }
        if (settings.gradient_mode == GradientMode::kDetached) {
          dz = drho;
          break;
        }
        const FilterWeights w = filter_weights(n, settings.kalman, tr.mask);
        for (std::size_t t = 0; t < n; ++t) {
          if (drho[t] == 0.0) continue;
          const auto row = w.row(t);
          for (std::size_t s = 0; s <= t; ++s) dz[s] += drho[t] * row[s];
        }
        break;
      }
    }

    for (std::size_t s = 0; s < n; ++s) {
      if (!tr.mask[s] || dz[s] == 0.0) continue;
      const std::size_t ctx = policy.context_index(r.prompt, std::span(tr.tokens).first(s));
      policy.log_softmax(ctx, lp);
      const double coef = weights[i] * dz[s];
      double* g = grad.data() + ctx * vocab;
      for (std::size_t a = 0; a < vocab; ++a) g[a] -= coef * std::exp(lp[a]);
      g[static_cast<std::size_t>(tr.tokens[s])] += coef;
    }
  }
  return grad;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || minibatch_size == 0) throw ParameterError("batch sizes must be >= 1");
  if (batch_size % minibatch_size != 0)
    throw ParameterError("batch_size must be divisible by minibatch_size");
  if (group_size < 2) throw ParameterError("group_size must be >= 2");
  if (max_len == 0) throw ParameterError("max_len must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0)
    throw ParameterError("learning_rate must be finite and >= 0");
  if (!(divergence_bound > 0.0)) throw ParameterError("divergence bound must be > 0");
  ToyPolicy check(policy);
  (void)check;
}

ObjectiveSettings TrainConfig::objective_settings() const {
  ObjectiveSettings s;
  s.method = method;
  s.gradient_mode = gradient_mode;
  s.clip = clip.value_or(default_clip(method));
  s.kalman = kalman;
  s.aggregation = aggregation;
  s.saturation_bound = saturation_bound;
  return s;
}

namespace {

// Stream tags keep prompt draws and per-group sampling independent.
constexpr std::uint64_t kPromptStream = 0x70726f6d7074ULL;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t step, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

TrainMetrics run_training(const TrainConfig& config, unsigned threads,
                          const MinibatchObserver& observer) {
  config.validate();
  const ObjectiveSettings settings = config.objective_settings();
  ToyPolicy policy(config.policy);
  const ToyTask task{config.policy.vocab_size};
  const std::size_t groups_per_minibatch = config.minibatch_size;
  const std::size_t G = config.group_size;

  TrainMetrics metrics;
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::mt19937_64 prompt_rng = stream(config.seed, step, kPromptStream);
    std::vector<int> prompts(config.batch_size);
    for (int& p : prompts)
      p = static_cast<int>(prompt_rng() % static_cast<std::uint64_t>(config.policy.num_prompts));

    std::vector<std::vector<Rollout>> groups(config.batch_size);
    parallel_for(config.batch_size, threads, [&](std::size_t b) {
      std::mt19937_64 rng = stream(config.seed, step, b);
      groups[b] = sample_group(policy, prompts[b], G, config.max_len, rng, task);
      for (std::size_t g = 0; g < G; ++g) {
        TokenTrace& tr = groups[b][g].trace;
        tr.group_id = "s" + std::to_string(step) + "-g" + std::to_string(b);
        tr.sample_id = tr.group_id + "-r" + std::to_string(g);
      }
    });
    std::vector<Rollout> rollouts;
    rollouts.reserve(config.batch_size * G);
    for (auto& g : groups)
      for (auto& r : g) rollouts.push_back(std::move(r));
    const std::vector<double> advantages = batch_advantages(rollouts, G);

    StepMetrics m;
    m.step = step;
    double entropy_sum = 0.0;
    std::size_t positions = 0;
    for (const Rollout& r : rollouts) {
      m.reward_mean += r.trace.score;
      for (std::size_t t = 0; t < r.trace.size(); ++t) {
        entropy_sum += policy.entropy(policy.context_index(r.prompt, std::span(r.trace.tokens).first(t)));
        ++positions;
      }
    }
    m.reward_mean /= static_cast<double>(rollouts.size());
    m.entropy = positions == 0 ? 0.0 : entropy_sum / static_cast<double>(positions);

    const std::size_t minibatches = config.batch_size / groups_per_minibatch;
    const std::size_t per_mb = groups_per_minibatch * G;
    for (std::size_t k = 0; k < minibatches; ++k) {
      Minibatch mb;
      mb.rollouts.assign(rollouts.begin() + static_cast<std::ptrdiff_t>(k * per_mb),
                         rollouts.begin() + static_cast<std::ptrdiff_t>((k + 1) * per_mb));
      mb.advantages.assign(advantages.begin() + static_cast<std::ptrdiff_t>(k * per_mb),
                           advantages.begin() + static_cast<std::ptrdiff_t>((k + 1) * per_mb));
      for (Rollout& r : mb.rollouts) recompute_logp(policy, r);

      const ObjectiveReport report = evaluate_objective(mb, settings);
      if (observer) observer({step, k, mb, report});
      m.pg_loss -= report.loss;
      m.clip_fraction += report.clip_fraction;

      const std::vector<double> grad = analytic_gradient(policy, mb, settings);
      auto theta = policy.parameters();
      for (std::size_t j = 0; j < theta.size(); ++j) theta[j] += config.learning_rate * grad[j];
      const double mag = policy.max_abs();
      if (!(mag <= config.divergence_bound)) throw TrainingDiverged(step, mag, metrics);
    }
    m.pg_loss /= static_cast<double>(minibatches);
    m.clip_fraction /= static_cast<double>(minibatches);
    metrics.steps.push_back(m);
  }
  return metrics;
}

}  // namespace ratio_forge
