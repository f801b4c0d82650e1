#include "ratio_forge/synthetic.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "ratio_forge/errors.hpp"

namespace ratio_forge {

std::vector<LogRatioSeries> drift_log_ratios(std::size_t count, const DriftSpec& spec,
                                             std::uint64_t seed) {
  if (spec.min_segment == 0 || spec.max_segment < spec.min_segment)
    throw ParameterError("drift segments need 0 < min_segment <= max_segment");
  std::vector<LogRatioSeries> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> seg_len(spec.min_segment, spec.max_segment);
    std::normal_distribution<double> level(0.0, spec.level_sigma);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);

    LogRatioSeries& z = out[i];
    z.values.resize(spec.length);
    z.mask.assign(spec.length, true);
    std::size_t t = 0;
    while (t < spec.length) {
      const double mu = level(rng);
      const std::size_t end = std::min(spec.length, t + seg_len(rng));
      for (; t < end; ++t) z.values[t] = mu + noise(rng);
    }
  }
  return out;
}

std::vector<TokenTrace> drift_traces(std::size_t count, const DriftSpec& spec, std::uint64_t seed,
                                     double base_logp) {
  const auto series = drift_log_ratios(count, spec, seed);
  std::vector<TokenTrace> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    TokenTrace& tr = out[i];
    tr.sample_id = "drift-" + std::to_string(i);
    tr.group_id = "drift";
    tr.tokens.assign(spec.length, 1);
    tr.logp_old.assign(spec.length, base_logp);
    tr.logp_new.resize(spec.length);
    tr.mask.assign(spec.length, true);
    for (std::size_t t = 0; t < spec.length; ++t)
      tr.logp_new[t] = std::min(0.0, base_logp + series[i].values[t]);
  }
  return out;
}

}  // namespace ratio_forge
