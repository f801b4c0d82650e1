#include "ratio_forge/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ratio_forge/errors.hpp"

namespace ratio_forge {

ClipConfig::ClipConfig(double eps_lo, double eps_hi) : eps_lo_(eps_lo), eps_hi_(eps_hi) {
  if (!std::isfinite(eps_lo) || eps_lo < 0.0) throw ParameterError("eps_lo must be finite and >= 0");
  if (!std::isfinite(eps_hi) || eps_hi < 0.0) throw ParameterError("eps_hi must be finite and >= 0");
  if (!(1.0 - eps_lo > 0.0)) throw ParameterError("1 - eps_lo must stay positive");
}

double ClipConfig::clip(double ratio) const { return std::clamp(ratio, lower(), upper()); }

std::string_view to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::kSeqMeanTokenMean:
      return "seq_mean_token_mean";
    case Aggregation::kTokenMean:
      return "token_mean";
  }
  return "?";
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "seq_mean_token_mean" || text == "seq-mean-token-mean")
    return Aggregation::kSeqMeanTokenMean;
  if (text == "token_mean" || text == "token-mean") return Aggregation::kTokenMean;
  throw ParameterError("unknown aggregation mode '" + std::string(text) + "'");
}

AdvantageSet group_relative_advantage(std::span<const double> scores) {
  if (scores.size() < 2) throw InputError("group needs at least 2 responses");
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("scores must lie in [0, 1]");

  const double n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / n);

  AdvantageSet out;
  out.per_response.assign(scores.size(), 0.0);
  // Spread below rounding noise of the mean counts as a constant group.
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out.per_response[i] = (scores[i] - mean) / sd;
  return out;
}

double sequence_ratio_geometric(const LogRatioSeries& z) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (!z.mask[t]) continue;
    sum += z.values[t];
    ++count;
  }
  if (count == 0) throw InputError("sequence ratio needs at least one valid token");
  return std::exp(sum / static_cast<double>(count));
}

SurrogateTerm clipped_surrogate_token(double ratio, double advantage, const ClipConfig& cfg) {
  const double unclipped = ratio * advantage;
  const double clipped = cfg.clip(ratio) * advantage;
  if (clipped < unclipped) return {clipped, true};
  return {unclipped, false};
}

double token_pg_coefficient(double ratio, double advantage, const ClipConfig& cfg) {
  return clipped_surrogate_token(ratio, advantage, cfg).clipped ? 0.0 : ratio * advantage;
}

namespace {

bool is_valid(const SurrogateInput& in, std::size_t t) { return in.mask == nullptr || (*in.mask)[t]; }

}  // namespace

double aggregate_terms(const ObjectiveReport& report, Aggregation mode) {
  const auto& terms = report.per_token_terms;
  if (mode == Aggregation::kTokenMean) {
    if (terms.empty()) return 0.0;
    return std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
  }
  double outer = 0.0;
  std::size_t responses = 0;
  for (std::size_t i = 0; i + 1 < report.response_offsets.size(); ++i) {
    const std::size_t begin = report.response_offsets[i];
    const std::size_t end = report.response_offsets[i + 1];
    if (begin == end) continue;
    double inner = 0.0;
    for (std::size_t k = begin; k < end; ++k) inner += terms[k];
    outer += inner / static_cast<double>(end - begin);
    ++responses;
  }
  return responses == 0 ? 0.0 : outer / static_cast<double>(responses);
}

ObjectiveReport surrogate_objective(std::span<const SurrogateInput> responses,
                                    const ClipConfig* clip, Aggregation mode) {
  if (responses.empty()) throw InputError("objective needs a non-empty batch");
  ObjectiveReport report;
  report.response_offsets.push_back(0);
  std::size_t clipped_count = 0;
  for (const SurrogateInput& in : responses) {
    if (in.mask != nullptr && in.mask->size() != in.ratios.size())
      throw InputError("ratio and mask lengths differ");
    for (std::size_t t = 0; t < in.ratios.size(); ++t) {
      if (!is_valid(in, t)) continue;
      const double r = in.ratios[t];
      if (!(r > 0.0) || !std::isfinite(r)) throw InputError("ratios must be finite and > 0");
      SurrogateTerm term{r * in.advantage, false};
      if (clip != nullptr) term = clipped_surrogate_token(r, in.advantage, *clip);
      report.per_token_terms.push_back(term.value);
      report.clipped.push_back(term.clipped);
      clipped_count += term.clipped ? 1 : 0;
    }
    report.response_offsets.push_back(report.per_token_terms.size());
  }
  report.token_count = report.per_token_terms.size();
  if (report.token_count == 0) throw InputError("objective batch has no valid tokens");
  report.clip_fraction =
      static_cast<double>(clipped_count) / static_cast<double>(report.token_count);
  report.loss = aggregate_terms(report, mode);
  return report;
}

namespace {

void check_group(std::size_t responses, const AdvantageSet& adv) {
  if (adv.group_size() != responses)
    throw InputError("advantage count " + std::to_string(adv.group_size()) +
                     " differs from response count " + std::to_string(responses));
}

}  // namespace

ObjectiveReport grpo_objective(std::span<const GroupLogRatios> groups, const ClipConfig& cfg,
                               Aggregation mode) {
  std::vector<std::vector<double>> ratios;
  std::vector<SurrogateInput> inputs;
  for (const auto& g : groups) {
    check_group(g.responses.size(), g.advantages);
    for (const auto& z : g.responses) {
      std::vector<double> r(z.size(), 1.0);
      for (std::size_t t = 0; t < z.size(); ++t)
        if (z.mask[t]) r[t] = std::exp(z.values[t]);
      ratios.push_back(std::move(r));
    }
  }
  std::size_t k = 0;
  for (const auto& g : groups)
    for (std::size_t i = 0; i < g.responses.size(); ++i, ++k)
      inputs.push_back({ratios[k], &g.responses[i].mask, g.advantages.per_response[i]});
  return surrogate_objective(inputs, &cfg, mode);
}

ObjectiveReport kpo_objective(std::span<const GroupRatios> groups, KpoMode kpo_mode,
                              const ClipConfig& cfg, Aggregation mode) {
  std::vector<SurrogateInput> inputs;
  for (const auto& g : groups) {
    check_group(g.ratios.size(), g.advantages);
    if (g.masks.size() != g.ratios.size()) throw InputError("one mask per response required");
    for (std::size_t i = 0; i < g.ratios.size(); ++i)
      inputs.push_back({g.ratios[i], &g.masks[i], g.advantages.per_response[i]});
  }
  return surrogate_objective(inputs, kpo_mode == KpoMode::kClipped ? &cfg : nullptr, mode);
}

ObjectiveReport sequence_level_objective(std::span<const GroupLogRatios> groups,
                                         const ClipConfig& cfg, Aggregation mode) {
  std::vector<std::vector<double>> ratios;
  for (const auto& g : groups) {
    check_group(g.responses.size(), g.advantages);
    for (const auto& z : g.responses) {
      const bool any = std::find(z.mask.begin(), z.mask.end(), true) != z.mask.end();
      ratios.emplace_back(z.size(), any ? sequence_ratio_geometric(z) : 1.0);
    }
  }
  std::vector<SurrogateInput> inputs;
  std::size_t k = 0;
  for (const auto& g : groups)
    for (std::size_t i = 0; i < g.responses.size(); ++i, ++k)
      inputs.push_back({ratios[k], &g.responses[i].mask, g.advantages.per_response[i]});
  return surrogate_objective(inputs, &cfg, mode);
}

double clip_fraction(std::span<const SurrogateInput> responses, const ClipConfig& cfg) {
  std::size_t valid = 0;
  std::size_t clipped = 0;
  for (const SurrogateInput& in : responses) {
    for (std::size_t t = 0; t < in.ratios.size(); ++t) {
      if (!is_valid(in, t)) continue;
      ++valid;
      if (clipped_surrogate_token(in.ratios[t], in.advantage, cfg).clipped) ++clipped;
    }
  }
  if (valid == 0) throw InputError("clip fraction needs at least one valid token");
  return static_cast<double>(clipped) / static_cast<double>(valid);
}

}  // namespace ratio_forge
