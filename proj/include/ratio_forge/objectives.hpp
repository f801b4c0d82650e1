#pragma once

// Clipped policy-gradient surrogates: token-ratio GRPO, sequence-level
// (geometric-mean) ratios, and KPO on Kalman-filtered ratios. All objectives
// are reported as values to maximize.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ratio_forge/ratio_filter.hpp"

namespace ratio_forge {

// Clip interval [1 - eps_lo, 1 + eps_hi].
class ClipConfig {
 public:
  ClipConfig() = default;
  ClipConfig(double eps_lo, double eps_hi);
  static ClipConfig symmetric(double eps) { return {eps, eps}; }

  double eps_lo() const { return eps_lo_; }
  double eps_hi() const { return eps_hi_; }
  double lower() const { return 1.0 - eps_lo_; }
  double upper() const { return 1.0 + eps_hi_; }
  double clip(double ratio) const;

  friend bool operator==(const ClipConfig&, const ClipConfig&) = default;

 private:
  double eps_lo_ = 0.2;
  double eps_hi_ = 0.2;
};

inline const ClipConfig kGrpoClip = ClipConfig::symmetric(0.2);
inline const ClipConfig kKpoClip{0.0003, 0.0004};
inline const ClipConfig kSeqLevelClip{0.0003, 0.0004};

struct AdvantageSet {
  std::vector<double> per_response;
  bool degenerate = false;  // zero score spread; every advantage is 0

  std::size_t group_size() const { return per_response.size(); }
};

enum class Aggregation {
  kSeqMeanTokenMean,  // mean over tokens within a response, then over responses
  kTokenMean,         // mean over every valid token of the batch
};

std::string_view to_string(Aggregation mode);
Aggregation parse_aggregation(std::string_view text);

enum class KpoMode { kClipped, kUnclipped };

struct SurrogateTerm {
  double value = 0.0;
  bool clipped = false;  // clipped branch strictly below the unclipped one
};

// One response: per-token ratios (already in ratio space), validity, advantage.
struct SurrogateInput {
  std::span<const double> ratios;
  const Mask* mask = nullptr;  // null means all valid
  double advantage = 0.0;
};

struct ObjectiveReport {
  double loss = 0.0;
  std::vector<double> per_token_terms;      // valid tokens only, response-major
  std::vector<bool> clipped;                // parallel to per_token_terms
  std::vector<std::size_t> response_offsets;  // size responses + 1, into per_token_terms
  double clip_fraction = 0.0;
  std::size_t token_count = 0;
};

// Population-std normalization within one group. Needs at least two scores in [0, 1].
AdvantageSet group_relative_advantage(std::span<const double> scores);

// exp(mean of valid log-ratios).
double sequence_ratio_geometric(const LogRatioSeries& z);

SurrogateTerm clipped_surrogate_token(double ratio, double advantage, const ClipConfig& cfg);

// d(term)/d(log ratio): ratio * advantage on the unclipped branch, 0 when the
// clipped constant is active. Ties count as unclipped.
double token_pg_coefficient(double ratio, double advantage, const ClipConfig& cfg);

// Re-aggregates per-token terms the same way the objective did.
double aggregate_terms(const ObjectiveReport& report, Aggregation mode);

// Shared evaluator. With clip == nullptr the plain r * A term is used.
ObjectiveReport surrogate_objective(std::span<const SurrogateInput> responses,
                                    const ClipConfig* clip, Aggregation mode);

// One group of responses and its advantages.
struct GroupLogRatios {
  std::vector<LogRatioSeries> responses;
  AdvantageSet advantages;
};

struct GroupRatios {
  std::vector<std::vector<double>> ratios;  // per response
  std::vector<Mask> masks;
  AdvantageSet advantages;
};

ObjectiveReport grpo_objective(std::span<const GroupLogRatios> groups, const ClipConfig& cfg,
                               Aggregation mode = Aggregation::kSeqMeanTokenMean);

ObjectiveReport kpo_objective(std::span<const GroupRatios> groups, KpoMode kpo_mode,
                              const ClipConfig& cfg,
                              Aggregation mode = Aggregation::kSeqMeanTokenMean);

// Every token of response i uses the constant geometric-mean ratio of that
// response. Treated as non-differentiable by the simulator.
ObjectiveReport sequence_level_objective(std::span<const GroupLogRatios> groups,
                                         const ClipConfig& cfg,
                                         Aggregation mode = Aggregation::kSeqMeanTokenMean);

double clip_fraction(std::span<const SurrogateInput> responses, const ClipConfig& cfg);

}  // namespace ratio_forge
