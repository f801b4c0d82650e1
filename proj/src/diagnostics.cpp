#include "ratio_forge/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ratio_forge/errors.hpp"
#include "ratio_forge/parallel.hpp"
#include "ratio_forge/spectrum.hpp"

namespace ratio_forge {

std::string_view to_string(TokenState s) {
  switch (s) {
    case TokenState::kUp:
      return "up";
    case TokenState::kDown:
      return "down";
    case TokenState::kOn:
      return "on";
  }
  return "?";
}

std::string_view to_string(Representation r) {
  return r == Representation::kRatio ? "ratio" : "log_ratio";
}

Representation parse_representation(std::string_view text) {
  if (text == "ratio") return Representation::kRatio;
  if (text == "log_ratio" || text == "log-ratio") return Representation::kLogRatio;
  throw ParameterError("unknown representation '" + std::string(text) + "'");
}

TokenState StateBand::classify(double ratio) const {
  if (exact_) {
    const double z = std::log(ratio);
    if (z > tolerance_) return TokenState::kUp;
    if (z < -tolerance_) return TokenState::kDown;
    return TokenState::kOn;
  }
  if (ratio > clip_.upper()) return TokenState::kUp;
  if (ratio < clip_.lower()) return TokenState::kDown;
  return TokenState::kOn;
}

std::vector<TokenState> StateSeries::valid_states() const {
  std::vector<TokenState> out;
  out.reserve(states.size());
  for (std::size_t t = 0; t < states.size(); ++t)
    if (mask[t]) out.push_back(states[t]);
  return out;
}

StateSeries classify_token_states(std::span<const double> ratios, const Mask& mask,
                                  const StateBand& band) {
  if (mask.size() != ratios.size()) throw InputError("ratio and mask lengths differ");
  StateSeries out;
  out.band = band;
  out.mask = mask;
  out.states.assign(ratios.size(), TokenState::kOn);
  for (std::size_t t = 0; t < ratios.size(); ++t) {
    if (!mask[t]) continue;
    if (!(ratios[t] > 0.0)) throw InputError("ratios must be > 0");
    out.states[t] = band.classify(ratios[t]);
  }
  return out;
}

std::vector<double> window_offpolicy_frequency(const StateSeries& states, std::size_t window) {
  if (window == 0) throw ParameterError("window must be >= 1");
  const auto valid = states.valid_states();
  const std::size_t windows = valid.size() / window;
  std::vector<double> freq(windows, 0.0);
  for (std::size_t w = 0; w < windows; ++w) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < window; ++j)
      if (valid[w * window + j] != TokenState::kOn) ++off;
    freq[w] = static_cast<double>(off) / static_cast<double>(window);
  }
  return freq;
}

WindowCurve aggregate_window_curves(std::span<const std::vector<double>> per_sample) {
  std::size_t longest = 0;
  for (const auto& c : per_sample) longest = std::max(longest, c.size());
  WindowCurve out;
  out.mean.assign(longest, 0.0);
  out.variance.assign(longest, 0.0);
  out.samples.assign(longest, 0);
  for (std::size_t w = 0; w < longest; ++w) {
    double sum = 0.0;
    for (const auto& c : per_sample)
      if (w < c.size()) {
        sum += c[w];
        ++out.samples[w];
      }
    const double n = static_cast<double>(out.samples[w]);
    out.mean[w] = sum / n;
    double ss = 0.0;
    for (const auto& c : per_sample)
      if (w < c.size()) ss += (c[w] - out.mean[w]) * (c[w] - out.mean[w]);
    out.variance[w] = ss / n;
  }
  return out;
}

double RunLengths::mean(TokenState s) const {
  const auto& r = of(s);
  if (r.empty()) return 0.0;
  return static_cast<double>(std::accumulate(r.begin(), r.end(), std::size_t{0})) /
         static_cast<double>(r.size());
}

RunLengths run_lengths(const StateSeries& states) {
  RunLengths out;
  const auto valid = states.valid_states();
  std::size_t run = 0;
  for (std::size_t t = 0; t < valid.size(); ++t) {
    if (t > 0 && valid[t] != valid[t - 1]) {
      out.runs[static_cast<std::size_t>(valid[t - 1])].push_back(run);
      run = 0;
    }
    ++run;
  }
  if (run > 0) out.runs[static_cast<std::size_t>(valid.back())].push_back(run);
  return out;
}

namespace {

double switch_rate(std::span<const TokenState> w) {
  std::size_t changes = 0;
  for (std::size_t j = 1; j < w.size(); ++j)
    if (w[j] != w[j - 1]) ++changes;
  return static_cast<double>(changes) / static_cast<double>(w.size() - 1);
}

}  // namespace

double switch_frequency(const StateSeries& states, std::size_t window) {
  if (window == 0) throw ParameterError("window must be >= 1");
  const auto valid = states.valid_states();
  if (valid.size() <= 1) return 0.0;
  const std::span<const TokenState> all(valid);
  if (valid.size() < window) return switch_rate(all);
  if (window < 2) return 0.0;  // single-token windows carry no rate
  const std::size_t windows = valid.size() / window;
  double sum = 0.0;
  for (std::size_t w = 0; w < windows; ++w) sum += switch_rate(all.subspan(w * window, window));
  return sum / static_cast<double>(windows);
}

double low_frequency_ratio(std::span<const double> series, std::size_t kc) {
  const std::size_t n = series.size();
  if (n == 0) throw InputError("low_frequency_ratio needs a non-empty series");
  if (kc > n / 2) throw ParameterError("cutoff kc must be <= floor(T/2)");
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t t = 0; t < n; ++t) centered[t] = series[t] - mean;

  const auto power = power_spectrum(centered);
  double total = 0.0;
  double low = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += power[k];
    if (k <= kc || k + kc >= n) low += power[k];
  }
  if (total < 1e-15) return 1.0;
  return std::min(1.0, low / total);
}

namespace {

double population_variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / n;
}

}  // namespace

VarianceStats variance_stats(std::span<const double> series, std::size_t window) {
  if (window == 0) throw ParameterError("window must be >= 1");
  VarianceStats out;
  out.global = population_variance(series);
  double sum = 0.0;
  std::size_t windows = 0;
  for (std::size_t begin = 0; begin < series.size(); begin += window) {
    const std::size_t len = std::min(window, series.size() - begin);
    if (len < 2) continue;
    sum += population_variance(series.subspan(begin, len));
    ++windows;
  }
  out.windowed_local = windows == 0 ? 0.0 : sum / static_cast<double>(windows);
  return out;
}

DynamicsReport sample_dynamics(std::span<const double> ratios, const Mask& mask,
                               const DiagnosticsOptions& options) {
  const StateSeries states = classify_token_states(ratios, mask, options.band);
  const auto valid = states.valid_states();
  if (valid.empty()) throw InputError("sample has no valid tokens");

  DynamicsReport rep;
  rep.samples = 1;
  rep.representation = options.representation;
  for (TokenState s : valid) ++rep.token_counts[static_cast<std::size_t>(s)];
  const double n = static_cast<double>(valid.size());
  for (std::size_t k = 0; k < kStateCount; ++k)
    rep.proportions[k] = static_cast<double>(rep.token_counts[k]) / n;

  const RunLengths runs = run_lengths(states);
  for (std::size_t k = 0; k < kStateCount; ++k) {
    rep.run_counts[k] = runs.runs[k].size();
    rep.mean_run_lengths[k] = runs.mean(static_cast<TokenState>(k));
  }
  rep.switch_frequency = switch_frequency(states, options.window);

  std::vector<double> series;
  series.reserve(valid.size());
  for (std::size_t t = 0; t < ratios.size(); ++t) {
    if (!mask[t]) continue;
    series.push_back(options.representation == Representation::kRatio ? ratios[t]
                                                                       : std::log(ratios[t]));
  }
  const std::size_t kc = std::min(options.kc.value_or(default_cutoff(series.size())),
                                  series.size() / 2);
  rep.lfr = low_frequency_ratio(series, kc);
  const VarianceStats var = variance_stats(series, options.window);
  rep.global_variance = var.global;
  rep.windowed_local_variance = var.windowed_local;
  return rep;
}

DynamicsReport average_reports(std::span<const DynamicsReport> reports) {
  DynamicsReport out;
  if (reports.empty()) return out;
  out.representation = reports.front().representation;
  std::array<std::size_t, kStateCount> with_state{};
  for (const auto& r : reports) {
    out.samples += r.samples;
    for (std::size_t k = 0; k < kStateCount; ++k) {
      out.proportions[k] += r.proportions[k];
      out.token_counts[k] += r.token_counts[k];
      out.run_counts[k] += r.run_counts[k];
      if (r.run_counts[k] > 0) {
        out.mean_run_lengths[k] += r.mean_run_lengths[k];
        ++with_state[k];
      }
    }
    out.switch_frequency += r.switch_frequency;
    out.lfr += r.lfr;
    out.global_variance += r.global_variance;
    out.windowed_local_variance += r.windowed_local_variance;
  }
  const double n = static_cast<double>(reports.size());
  for (std::size_t k = 0; k < kStateCount; ++k) {
    out.proportions[k] /= n;
    if (with_state[k] > 0) out.mean_run_lengths[k] /= static_cast<double>(with_state[k]);
  }
  out.switch_frequency /= n;
  out.lfr /= n;
  out.global_variance /= n;
  out.windowed_local_variance /= n;
  return out;
}

DynamicsReport dynamics_over(std::span<const RatioSample> samples,
                             const DiagnosticsOptions& options, unsigned threads) {
  std::vector<std::optional<DynamicsReport>> slots(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const RatioSample& s = samples[i];
    const Mask all(s.ratios.size(), true);
    const Mask& mask = s.mask != nullptr ? *s.mask : all;
    if (std::find(mask.begin(), mask.end(), true) == mask.end()) return;
    slots[i] = sample_dynamics(s.ratios, mask, options);
  });
  std::vector<DynamicsReport> reports;
  for (auto& r : slots)
    if (r) reports.push_back(*r);
  DynamicsReport out = average_reports(reports);
  out.representation = options.representation;
  return out;
}

PairedDynamicsReport dynamics_report(std::span<const RatioSample> raw,
                                     std::span<const RatioSample> filtered,
                                     const DiagnosticsOptions& options, unsigned threads) {
  if (raw.size() != filtered.size()) throw InputError("raw and filtered sample counts differ");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].ratios.size() != filtered[i].ratios.size())
      throw InputError("sample " + std::to_string(i) + ": raw and filtered lengths differ");
    const bool raw_masked = raw[i].mask != nullptr;
    const bool filt_masked = filtered[i].mask != nullptr;
    if (raw_masked && filt_masked && *raw[i].mask != *filtered[i].mask)
      throw InputError("sample " + std::to_string(i) + ": raw and filtered masks differ");
  }
  return {dynamics_over(raw, options, threads), dynamics_over(filtered, options, threads)};
}

}  // namespace ratio_forge
