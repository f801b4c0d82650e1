#pragma once

// Run configuration shared by every subcommand. Files are JSON (comments
// allowed); nested objects and dotted keys are equivalent:
//
//   {"kalman": {"q": 1e-4}, "train.steps": 50}
//
// Keys:
//   kalman.q, kalman.v, kalman.rho0, kalman.p0, kalman.saturation_bound
//   clip.{grpo,kpo,seq_level}.{eps_lo,eps_hi}
//   objective.aggregation            seq_mean_token_mean | token_mean
//   diagnostics.window, diagnostics.kc (null = T/20), diagnostics.band (clip | exact),
//   diagnostics.exact_tol, diagnostics.representation (ratio | log_ratio)
//   train.batch_size, train.minibatch_size, train.group_size, train.max_len,
//   train.method, train.learning_rate, train.steps, train.seed, train.gradient_mode,
//   train.vocab_size, train.context_order, train.num_prompts, train.divergence_bound
//
// Unknown keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ratio_forge/diagnostics.hpp"
#include "ratio_forge/objectives.hpp"
#include "ratio_forge/ratio_filter.hpp"
#include "ratio_forge/toy_sim.hpp"

namespace ratio_forge {

struct RunConfig {
  // Unset q means 1e-6, except for kpo_unclipped where it means 1e-4.
  std::optional<double> kalman_q;
  double kalman_v = 1.0;
  double kalman_rho0 = 0.0;
  double kalman_p0 = 1.0;
  double saturation_bound = kDefaultSaturationBound;

  double grpo_eps_lo = 0.2, grpo_eps_hi = 0.2;
  double kpo_eps_lo = 0.0003, kpo_eps_hi = 0.0004;
  double seq_level_eps_lo = 0.0003, seq_level_eps_hi = 0.0004;

  Aggregation aggregation = Aggregation::kSeqMeanTokenMean;

  std::size_t window = kDefaultWindow;
  std::optional<std::size_t> kc;
  bool exact_band = false;
  double exact_tol = 1e-12;
  Representation representation = Representation::kRatio;

  TrainConfig train;

  KalmanParams kalman() const;                  // q defaults to 1e-6
  KalmanParams kalman_for(Method method) const;
  ClipConfig clip_for(Method method) const;
  DiagnosticsOptions diagnostics() const;
  TrainConfig train_config() const;  // train.* with kalman and clip resolved for train.method

  // Sets one key from a JSON literal; bare words are read as strings.
  // Throws ParameterError naming the key.
  void set(std::string_view key, std::string_view text);
};

std::vector<std::string> config_keys();

// Applies a config file on top of `config`.
void apply_config_text(RunConfig& config, std::string_view text, const std::string& source);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

RunConfig load_config(const std::filesystem::path& path);

inline constexpr const char* kConfigEnvVar = "RATIO_FORGE_CONFIG";

}  // namespace ratio_forge
