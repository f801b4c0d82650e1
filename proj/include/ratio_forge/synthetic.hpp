#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ratio_forge/ratio_filter.hpp"
#include "ratio_forge/trace.hpp"

namespace ratio_forge {

// Log-ratio generator: a piecewise-constant latent level (segments of uniform
// random length, Gaussian levels) observed through white Gaussian noise.
struct DriftSpec {
  std::size_t length = 2048;
  double noise_sigma = 0.4;
  double level_sigma = 0.1;
  std::size_t min_segment = 128;
  std::size_t max_segment = 512;
};

std::vector<LogRatioSeries> drift_log_ratios(std::size_t count, const DriftSpec& spec,
                                             std::uint64_t seed);

// Same series wrapped as traces: logp_old fixed at base_logp, logp_new = logp_old + z.
std::vector<TokenTrace> drift_traces(std::size_t count, const DriftSpec& spec, std::uint64_t seed,
                                     double base_logp = -8.0);

}  // namespace ratio_forge
