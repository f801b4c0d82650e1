#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ratio_forge/toy_sim.hpp"

namespace ratio_forge {

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(numeric) + 1e-8);
}

bool stop_gradient(const ObjectiveSettings& s) {
  return s.method == Method::kSeqLevel ||
         ((s.method == Method::kKpoClipped || s.method == Method::kKpoUnclipped) &&
          s.gradient_mode == GradientMode::kDetached);
}

// Per-token ratios at perturbed parameters. Stop-gradient anchors stay at
// their base value and move only through this token's own log-ratio.
std::vector<double> perturbed_ratios(const Rollout& base, const std::vector<double>& anchor,
                                     const ToyPolicy& policy, const ObjectiveSettings& settings) {
  Rollout r = base;
  recompute_logp(policy, r);
  if (!stop_gradient(settings)) return method_ratios(r, settings);
  std::vector<double> out(anchor);
  for (std::size_t t = 0; t < out.size(); ++t)
    if (r.trace.mask[t]) out[t] = anchor[t] * std::exp(r.trace.logp_new[t] - base.trace.logp_new[t]);
  return out;
}

}  // namespace

double finite_difference_check(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, std::span<const double> analytic,
                               double h, std::span<const std::size_t> indices) {
  if (analytic.size() != x.size()) throw InputError("gradient and point differ in size");
  if (!(h > 0.0)) throw ParameterError("step h must be > 0");
  const std::vector<std::size_t> every = indices.empty() ? all_indices(x.size()) : std::vector<std::size_t>{};
  const std::span<const std::size_t> idx = indices.empty() ? std::span<const std::size_t>(every) : indices;

  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t j : idx) {
    if (j >= x.size()) throw InputError("index out of range");
    probe[j] = x[j] + h;
    const double up = f(probe);
    probe[j] = x[j] - h;
    const double down = f(probe);
    probe[j] = x[j];
    worst = std::max(worst, relative_error(analytic[j], (up - down) / (2.0 * h)));
  }
  return worst;
}

double finite_difference_check(const ToyPolicy& policy, const Minibatch& batch,
                               const ObjectiveSettings& settings, double h,
                               std::span<const std::size_t> indices) {
  const std::vector<double> analytic = analytic_gradient(policy, batch, settings);
  const std::size_t n = batch.rollouts.size();

  std::vector<std::vector<double>> anchors(n);
  for (std::size_t i = 0; i < n; ++i) anchors[i] = method_ratios(batch.rollouts[i], settings);

  // A perturbation of size h moves every log-ratio (filtered ones included,
  // since filter rows sum to at most 1) by at most h.
  if (is_clipped(settings.method)) {
    for (std::size_t i = 0; i < n; ++i) {
      const double adv = batch.advantages[i];
      if (adv == 0.0) continue;
      const double edge = adv > 0.0 ? settings.clip.upper() : settings.clip.lower();
      const TokenTrace& tr = batch.rollouts[i].trace;
      for (std::size_t t = 0; t < tr.size(); ++t) {
        const double v = anchors[i][t];
        if (tr.mask[t] && std::abs(v - edge) <= 4.0 * h * std::max(1.0, v))
          throw BoundaryTokenError("trace '" + tr.sample_id + "' token " + std::to_string(t) +
                                   " is within reach of the clip edge");
      }
    }
  }

  // Parameters of contexts no valid token visits cannot change the loss.
  const auto vocab = static_cast<std::size_t>(policy.vocab_size());
  std::vector<bool> visited(policy.num_contexts(), false);
  for (const Rollout& r : batch.rollouts)
    for (std::size_t t = 0; t < r.trace.size(); ++t)
      if (r.trace.mask[t])
        visited[policy.context_index(r.prompt, std::span(r.trace.tokens).first(t))] = true;

  ToyPolicy probe = policy;
  std::vector<std::vector<double>> ratios(n);
  std::vector<SurrogateInput> inputs(n);
  const ClipConfig* clip = is_clipped(settings.method) ? &settings.clip : nullptr;
  const auto loss = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      ratios[i] = perturbed_ratios(batch.rollouts[i], anchors[i], probe, settings);
      inputs[i] = {ratios[i], &batch.rollouts[i].trace.mask, batch.advantages[i]};
    }
    return surrogate_objective(inputs, clip, settings.aggregation).loss;
  };

  const std::vector<std::size_t> every =
      indices.empty() ? all_indices(policy.num_parameters()) : std::vector<std::size_t>{};
  const std::span<const std::size_t> idx =
      indices.empty() ? std::span<const std::size_t>(every) : indices;

  auto theta = probe.parameters();
  double worst = 0.0;
  for (std::size_t j : idx) {
    if (j >= theta.size()) throw InputError("parameter index out of range");
    double numeric = 0.0;
    if (visited[j / vocab]) {
      const double x = theta[j];
      theta[j] = x + h;
      const double up = loss();
      theta[j] = x - h;
      const double down = loss();
      theta[j] = x;
      numeric = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic[j], numeric));
  }
  return worst;
}

}  // namespace ratio_forge
