#pragma once

// Scalar causal Kalman filtering of token-level log importance ratios.
//
// The latent log-ratio follows a random walk rho_t = rho_{t-1} + eta_t with
// Var(eta) = Q, and each token observes z_t = rho_t + eps_t with Var(eps) = V.
// The filter runs strictly left to right; the estimate at token t depends on
// z_1..z_t only.

#include <cstddef>
#include <span>
#include <vector>

#include "ratio_forge/trace.hpp"

namespace ratio_forge {

struct LogRatioSeries {
  std::vector<double> values;
  Mask mask;

  std::size_t size() const { return values.size(); }
};

// Process noise q, observation noise v, prior mean rho0 and prior variance p0.
// Immutable once constructed. The default matches the KPO-clipped setting.
class KalmanParams {
 public:
  KalmanParams() = default;

  // Requires q >= 0, v > 0, p0 >= 0 and not (q == 0 && p0 == 0).
  KalmanParams(double q, double v, double rho0 = 0.0, double p0 = 1.0);

  // q = 0, p0 = 0: every gain is zero and the filter emits rho0 forever.
  static KalmanParams frozen_prior(double rho0, double v = 1.0);

  double q() const { return q_; }
  double v() const { return v_; }
  double rho0() const { return rho0_; }
  double p0() const { return p0_; }

  friend bool operator==(const KalmanParams&, const KalmanParams&) = default;

 private:
  double q_ = 1e-6;
  double v_ = 1.0;
  double rho0_ = 0.0;
  double p0_ = 1.0;
};

struct KalmanState {
  double rho = 0.0;  // posterior mean
  double p = 1.0;    // posterior variance
};

struct KalmanStepResult {
  KalmanState state;
  double rho_pred = 0.0;
  double p_pred = 0.0;
  double gain = 0.0;
  double innovation = 0.0;
};

struct FilteredSeries {
  std::vector<double> rho_post;
  std::vector<double> p_post;
  std::vector<double> gain;
  std::vector<double> innovation;
  Mask mask;

  std::size_t size() const { return rho_post.size(); }
};

// Closed-form unrolling of the filter: rho_{t|t} = prior[t] * rho0 + sum_s obs(t, s) * z_s.
class FilterWeights {
 public:
  FilterWeights() = default;
  explicit FilterWeights(std::size_t length);

  std::size_t size() const { return prior_.size(); }
  double prior(std::size_t t) const { return prior_[t]; }
  double& prior(std::size_t t) { return prior_[t]; }

  // Zero for s > t.
  double obs(std::size_t t, std::size_t s) const { return s > t ? 0.0 : rows_[offset(t) + s]; }
  double& obs(std::size_t t, std::size_t s) { return rows_[offset(t) + s]; }

  // Row t restricted to s <= t.
  std::span<const double> row(std::size_t t) const { return {rows_.data() + offset(t), t + 1}; }

  std::vector<double> apply(std::span<const double> z, double rho0) const;

 private:
  static std::size_t offset(std::size_t t) { return t * (t + 1) / 2; }

  std::vector<double> prior_;
  std::vector<double> rows_;
};

struct SteadyState {
  double p_pred = 0.0;
  double gain = 0.0;
};

LogRatioSeries compute_log_ratios(const TokenTrace& trace);

KalmanStepResult kalman_step(const KalmanState& state, double z, const KalmanParams& params);

// Invalid positions do not advance the state; they repeat the carried posterior
// with zero gain and innovation.
FilteredSeries kalman_filter_sequence(const LogRatioSeries& z, const KalmanParams& params);

FilterWeights filter_weights(std::size_t length, const KalmanParams& params, const Mask& mask);

// Riccati fixed point of the predicted variance and its gain.
SteadyState steady_state(const KalmanParams& params);

inline constexpr double kDefaultSaturationBound = 30.0;

// exp(rho_post) at every position. Throws SaturationError if a valid position
// has |rho_post| > bound.
std::vector<double> to_ratio_space(const FilteredSeries& filtered,
                                   double bound = kDefaultSaturationBound);

}  // namespace ratio_forge
