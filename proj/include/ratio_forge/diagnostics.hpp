#pragma once

// Off-policy structure statistics over per-token ratio series: token states,
// window-wise off-policy frequency, run lengths, switch frequency, spectral
// low-frequency ratio and windowed variance.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ratio_forge/objectives.hpp"
#include "ratio_forge/trace.hpp"

namespace ratio_forge {

enum class TokenState : std::uint8_t { kUp = 0, kDown = 1, kOn = 2 };
inline constexpr std::size_t kStateCount = 3;

std::string_view to_string(TokenState s);

// On-policy band. Clip mode: r in [1 - eps_lo, 1 + eps_hi] (closed). Exact
// mode: |log r| <= tolerance.
class StateBand {
 public:
  static StateBand clip(const ClipConfig& cfg) { return StateBand(false, cfg, 0.0); }
  static StateBand exact(double tolerance = 1e-12) { return StateBand(true, {}, tolerance); }

  bool is_exact() const { return exact_; }
  const ClipConfig& clip_config() const { return clip_; }
  double tolerance() const { return tolerance_; }
  TokenState classify(double ratio) const;

 private:
  StateBand(bool exact, ClipConfig clip, double tol) : exact_(exact), clip_(clip), tolerance_(tol) {}
  bool exact_;
  ClipConfig clip_;
  double tolerance_;
};

struct StateSeries {
  std::vector<TokenState> states;
  StateBand band = StateBand::exact();
  Mask mask;

  // Labels of valid tokens in order.
  std::vector<TokenState> valid_states() const;
};

enum class Representation { kRatio, kLogRatio };
std::string_view to_string(Representation r);
Representation parse_representation(std::string_view text);

inline constexpr std::size_t kDefaultWindow = 50;

StateSeries classify_token_states(std::span<const double> ratios, const Mask& mask,
                                  const StateBand& band);

// Non-overlapping windows over the valid prefix, truncated to whole windows.
std::vector<double> window_offpolicy_frequency(const StateSeries& states,
                                               std::size_t window = kDefaultWindow);

// Missing-aware (nanmean / population nanvar) aggregation of per-sample window curves.
struct WindowCurve {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<std::size_t> samples;
};
WindowCurve aggregate_window_curves(std::span<const std::vector<double>> per_sample);

struct RunLengths {
  std::array<std::vector<std::size_t>, kStateCount> runs;

  const std::vector<std::size_t>& of(TokenState s) const { return runs[static_cast<std::size_t>(s)]; }
  // Zero when the state never occurs.
  double mean(TokenState s) const;
};

RunLengths run_lengths(const StateSeries& states);

double switch_frequency(const StateSeries& states, std::size_t window = kDefaultWindow);

// Energy fraction of the mean-centered series in DFT bins {0..kc} and {T-kc..T-1}.
// Returns 1 for a series with (numerically) zero centered power.
double low_frequency_ratio(std::span<const double> series, std::size_t kc);

inline std::size_t default_cutoff(std::size_t length) { return length / 20; }

struct VarianceStats {
  double global = 0.0;
  double windowed_local = 0.0;
};

// Population variances; windows shorter than 2 are skipped.
VarianceStats variance_stats(std::span<const double> series, std::size_t window = kDefaultWindow);

struct DiagnosticsOptions {
  StateBand band = StateBand::clip(kKpoClip);
  std::size_t window = kDefaultWindow;
  std::optional<std::size_t> kc;  // unset: floor(T / 20) per sample
  Representation representation = Representation::kRatio;
};

struct DynamicsReport {
  std::array<double, kStateCount> proportions{};       // up, down, on
  std::array<double, kStateCount> mean_run_lengths{};  // up, down, on
  double switch_frequency = 0.0;
  double lfr = 0.0;
  double global_variance = 0.0;
  double windowed_local_variance = 0.0;

  // Accounting totals across the samples behind this report.
  std::array<std::size_t, kStateCount> token_counts{};
  std::array<std::size_t, kStateCount> run_counts{};
  std::size_t samples = 0;
  Representation representation = Representation::kRatio;
};

struct RatioSample {
  std::span<const double> ratios;
  const Mask* mask = nullptr;
};

DynamicsReport sample_dynamics(std::span<const double> ratios, const Mask& mask,
                               const DiagnosticsOptions& options);

// Averages per-sample reports; mean run lengths skip samples lacking the state.
DynamicsReport average_reports(std::span<const DynamicsReport> reports);

struct PairedDynamicsReport {
  DynamicsReport before;
  DynamicsReport after;
};

// raw[i] and filtered[i] describe the same sample and must share a mask.
PairedDynamicsReport dynamics_report(std::span<const RatioSample> raw,
                                     std::span<const RatioSample> filtered,
                                     const DiagnosticsOptions& options, unsigned threads = 1);

DynamicsReport dynamics_over(std::span<const RatioSample> samples,
                             const DiagnosticsOptions& options, unsigned threads = 1);

}  // namespace ratio_forge
