#include "ratio_forge/ratio_filter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ratio_forge/errors.hpp"

namespace ratio_forge {

std::size_t TokenTrace::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void validate_trace(const TokenTrace& trace) {
  const std::size_t n = trace.tokens.size();
  auto fail = [&](const char* field, const std::string& what) {
    throw ValidationError("trace '" + trace.sample_id + "'", 0, field, what);
  };
  if (trace.logp_old.size() != n) fail("logp_old", "length differs from tokens");
  if (trace.logp_new.size() != n) fail("logp_new", "length differs from tokens");
  if (trace.mask.size() != n) fail("mask", "length differs from tokens");
  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(trace.logp_old[t]) || trace.logp_old[t] > 0.0)
      fail("logp_old", "entry " + std::to_string(t) + " is not a finite value <= 0");
    if (!std::isfinite(trace.logp_new[t]) || trace.logp_new[t] > 0.0)
      fail("logp_new", "entry " + std::to_string(t) + " is not a finite value <= 0");
  }
  if (!(trace.score >= 0.0 && trace.score <= 1.0)) fail("score", "must lie in [0, 1]");
}

KalmanParams::KalmanParams(double q, double v, double rho0, double p0)
    : q_(q), v_(v), rho0_(rho0), p0_(p0) {
  if (!std::isfinite(q) || q < 0.0) throw ParameterError("kalman q must be finite and >= 0");
  if (!std::isfinite(v) || v <= 0.0) throw ParameterError("kalman v must be finite and > 0");
  if (!std::isfinite(p0) || p0 < 0.0) throw ParameterError("kalman p0 must be finite and >= 0");
  if (!std::isfinite(rho0)) throw ParameterError("kalman rho0 must be finite");
  if (q == 0.0 && p0 == 0.0)
    throw ParameterError("q = 0 with p0 = 0 ignores all data; use KalmanParams::frozen_prior");
}

KalmanParams KalmanParams::frozen_prior(double rho0, double v) {
  KalmanParams params(0.0, v, rho0, 1.0);
  params.p0_ = 0.0;
  return params;
}

LogRatioSeries compute_log_ratios(const TokenTrace& trace) {
  const std::size_t n = trace.tokens.size();
  if (trace.logp_old.size() != n || trace.logp_new.size() != n || trace.mask.size() != n)
    throw InputError("trace '" + trace.sample_id + "': field lengths differ");
  LogRatioSeries out;
  out.values.assign(n, 0.0);
  out.mask = trace.mask;
  for (std::size_t t = 0; t < n; ++t)
    if (trace.mask[t]) out.values[t] = trace.logp_new[t] - trace.logp_old[t];
  return out;
}

KalmanStepResult kalman_step(const KalmanState& state, double z, const KalmanParams& params) {
  if (!std::isfinite(z)) throw InputError("kalman_step: observation is not finite");
  if (!(params.v() > 0.0)) throw ParameterError("kalman_step: v must be > 0");
  KalmanStepResult r;
  r.rho_pred = state.rho;
  r.p_pred = state.p + params.q();
  r.innovation = z - r.rho_pred;
  r.gain = r.p_pred / (r.p_pred + params.v());
  r.state.rho = r.rho_pred + r.gain * r.innovation;
  r.state.p = (1.0 - r.gain) * r.p_pred;
  return r;
}

FilteredSeries kalman_filter_sequence(const LogRatioSeries& z, const KalmanParams& params) {
  const std::size_t n = z.size();
  if (z.mask.size() != n) throw InputError("kalman_filter_sequence: mask length differs");
  FilteredSeries out;
  out.rho_post.resize(n);
  out.p_post.resize(n);
  out.gain.assign(n, 0.0);
  out.innovation.assign(n, 0.0);
  out.mask = z.mask;

  KalmanState state{params.rho0(), params.p0()};
  for (std::size_t t = 0; t < n; ++t) {
    if (z.mask[t]) {
      const KalmanStepResult step = kalman_step(state, z.values[t], params);
      state = step.state;
      out.gain[t] = step.gain;
      out.innovation[t] = step.innovation;
    }
    out.rho_post[t] = state.rho;
    out.p_post[t] = state.p;
  }
  return out;
}

FilterWeights::FilterWeights(std::size_t length)
    : prior_(length, 0.0), rows_(length * (length + 1) / 2, 0.0) {}

std::vector<double> FilterWeights::apply(std::span<const double> z, double rho0) const {
  if (z.size() != size()) throw InputError("FilterWeights::apply: length mismatch");
  std::vector<double> out(size());
  for (std::size_t t = 0; t < size(); ++t) {
    double acc = prior_[t] * rho0;
    const auto r = row(t);
    for (std::size_t s = 0; s <= t; ++s) acc += r[s] * z[s];
    out[t] = acc;
  }
  return out;
}

FilterWeights filter_weights(std::size_t length, const KalmanParams& params, const Mask& mask) {
  if (mask.size() != length) throw InputError("filter_weights: mask length differs");
  FilterWeights w(length);
  double p = params.p0();
  double prior = 1.0;
  for (std::size_t t = 0; t < length; ++t) {
    double keep = 1.0;
    double gain = 0.0;
    if (mask[t]) {
      const double p_pred = p + params.q();
      gain = p_pred / (p_pred + params.v());
      p = (1.0 - gain) * p_pred;
      keep = 1.0 - gain;
    }
    prior *= keep;
    w.prior(t) = prior;
    if (t > 0)
      for (std::size_t s = 0; s < t; ++s) w.obs(t, s) = w.obs(t - 1, s) * keep;
    w.obs(t, t) = gain;
  }
  return w;
}

SteadyState steady_state(const KalmanParams& params) {
  const double q = params.q();
  const double v = params.v();
  SteadyState s;
  // Nonnegative root of P^2 - qP - qv = 0.
  s.p_pred = (q + std::sqrt(q * q + 4.0 * q * v)) / 2.0;
  s.gain = s.p_pred / (s.p_pred + v);
  return s;
}

std::vector<double> to_ratio_space(const FilteredSeries& filtered, double bound) {
  std::vector<double> out(filtered.size(), 1.0);
  for (std::size_t t = 0; t < filtered.size(); ++t) {
    const double rho = filtered.rho_post[t];
    const bool valid = t < filtered.mask.size() && filtered.mask[t];
    if (valid && !(std::abs(rho) <= bound)) throw SaturationError(t, rho, bound);
    out[t] = std::exp(std::clamp(rho, -bound, bound));
  }
  return out;
}

}  // namespace ratio_forge
