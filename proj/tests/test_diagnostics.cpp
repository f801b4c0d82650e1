#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "ratio_forge/diagnostics.hpp"
#include "ratio_forge/errors.hpp"
#include "ratio_forge/ratio_filter.hpp"
#include "ratio_forge/spectrum.hpp"
#include "ratio_forge/synthetic.hpp"
#include "support.hpp"

using namespace ratio_forge;
using doctest::Approx;

namespace {

constexpr TokenState U = TokenState::kUp;
constexpr TokenState D = TokenState::kDown;
constexpr TokenState O = TokenState::kOn;

StateSeries states_of(std::vector<TokenState> s) {
  StateSeries out;
  out.mask.assign(s.size(), true);
  out.states = std::move(s);
  return out;
}

std::vector<double> direct_power(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / n);
    out[k] = std::norm(acc);
  }
  return out;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("token state classification") {
  const std::vector<double> ones(5, 1.0);
  const Mask all(5, true);
  for (const StateBand& band : {StateBand::clip(kKpoClip), StateBand::clip(kGrpoClip), StateBand::exact()})
    for (TokenState s : classify_token_states(ones, all, band).states) CHECK(s == O);

  const std::vector<double> r{1.001, 0.999, 1.0};
  CHECK(classify_token_states(r, Mask(3, true), StateBand::clip(kKpoClip)).states ==
        std::vector<TokenState>{U, D, O});

  const StateBand band = StateBand::clip(kKpoClip);
  CHECK(band.classify(kKpoClip.upper()) == O);
  CHECK(band.classify(kKpoClip.lower()) == O);
  CHECK(band.classify(std::nextafter(kKpoClip.upper(), 2.0)) == U);

  const StateBand exact = StateBand::exact();
  CHECK(exact.classify(std::exp(5e-13)) == O);
  CHECK(exact.classify(std::exp(1e-9)) == U);
  CHECK(exact.classify(std::exp(-1e-9)) == D);
}

TEST_CASE("window off-policy frequency") {
  CHECK(window_offpolicy_frequency(states_of(std::vector<TokenState>(100, O))) ==
        std::vector<double>{0.0, 0.0});
  CHECK(window_offpolicy_frequency(states_of(std::vector<TokenState>(120, U))) ==
        std::vector<double>{1.0, 1.0});
  CHECK(window_offpolicy_frequency(states_of({U, O, O, D, O, O, O, O}), 4) ==
        std::vector<double>{0.5, 0.0});
  CHECK(window_offpolicy_frequency(states_of({U, U, U}), 4).empty());

  const std::vector<std::vector<double>> curves{{0.2, 0.4}, {0.6}, {}};
  const WindowCurve c = aggregate_window_curves(curves);
  CHECK(c.mean[0] == Approx(0.4));
  CHECK(c.variance[0] == Approx(0.04));
  CHECK(c.mean[1] == 0.4);
  CHECK(c.variance[1] == 0.0);
  CHECK(c.samples == std::vector<std::size_t>{2, 1});
}

TEST_CASE("run lengths") {
  const RunLengths a = run_lengths(states_of({U, U, D, D, D, U}));
  CHECK(a.of(U) == std::vector<std::size_t>{2, 1});
  CHECK(a.mean(U) == 1.5);
  CHECK(a.of(D) == std::vector<std::size_t>{3});
  CHECK(a.mean(D) == 3.0);
  CHECK(a.of(O).empty());
  CHECK(a.mean(O) == 0.0);

  CHECK(run_lengths(states_of(std::vector<TokenState>(7, O))).of(O) == std::vector<std::size_t>{7});

  const RunLengths alt = run_lengths(states_of({U, D, U, D}));
  CHECK(alt.of(U) == std::vector<std::size_t>{1, 1});
  CHECK(alt.of(D) == std::vector<std::size_t>{1, 1});

  CHECK(run_lengths(states_of({})).of(U).empty());

  StateSeries holes = states_of({U, D, U});
  holes.mask = {true, false, true};
  CHECK(run_lengths(holes).of(U) == std::vector<std::size_t>{2});
}

TEST_CASE("switch frequency") {
  CHECK(switch_frequency(states_of({U, D, U, D})) == 1.0);
  CHECK(switch_frequency(states_of(std::vector<TokenState>(200, D))) == 0.0);
  CHECK(switch_frequency(states_of({U})) == 0.0);
  CHECK(switch_frequency(states_of({})) == 0.0);

  // Two full windows of 4 and a dropped tail.
  CHECK(switch_frequency(states_of({U, D, U, D, O, O, O, O, U, D}), 4) == 0.5);
}

TEST_CASE("low frequency ratio") {
  CHECK(low_frequency_ratio(std::vector<double>(64, 3.25), 3) == 1.0);

  const std::size_t n = 128;
  std::vector<double> sine(n);
  for (std::size_t t = 0; t < n; ++t) sine[t] = std::sin(2.0 * std::numbers::pi * 10.0 * t / n);
  CHECK(low_frequency_ratio(sine, 6) < 1e-9);
  CHECK(low_frequency_ratio(sine, 10) == Approx(1.0).epsilon(1e-12));

  auto g = rf_test::rng_for(31);
  const auto noise = rf_test::normals(g, 101);
  CHECK(low_frequency_ratio(noise, 50) == Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(low_frequency_ratio(std::vector<double>{}, 0), InputError);
  CHECK_THROWS_AS(low_frequency_ratio(noise, 51), ParameterError);
  CHECK(default_cutoff(2048) == 102);
}

TEST_CASE("variance stats") {
  const auto c = variance_stats(std::vector<double>(30, 1.5));
  CHECK(c.global == 0.0);
  CHECK(c.windowed_local == 0.0);

  const auto a = variance_stats(std::vector<double>{0, 2});
  CHECK(a.global == 1.0);
  CHECK(a.windowed_local == 1.0);

  const auto b = variance_stats(std::vector<double>{0, 2, 0, 2}, 2);
  CHECK(b.global == 1.0);
  CHECK(b.windowed_local == 1.0);

  // Trailing window of one token is skipped.
  const auto d = variance_stats(std::vector<double>{0, 2, 7}, 2);
  CHECK(d.windowed_local == 1.0);
}

TEST_CASE("paired dynamics report") {
  auto g = rf_test::rng_for(32);
  std::vector<std::vector<double>> ratios;
  std::vector<Mask> masks;
  for (int i = 0; i < 6; ++i) {
    auto z = rf_test::normals(g, 300, 0.01);
    for (double& x : z) x = std::exp(x);
    ratios.push_back(z);
    masks.emplace_back(300, true);
  }
  std::vector<RatioSample> raw;
  for (std::size_t i = 0; i < ratios.size(); ++i) raw.push_back({ratios[i], &masks[i]});
  const auto same = dynamics_report(raw, raw, {});
  CHECK(same.before.switch_frequency == same.after.switch_frequency);
  CHECK(same.before.lfr == same.after.lfr);
  CHECK(same.before.proportions == same.after.proportions);
  CHECK(same.before.mean_run_lengths == same.after.mean_run_lengths);
  CHECK(same.before.windowed_local_variance == same.after.windowed_local_variance);

  // Filtering white noise slows the state switching.
  std::vector<std::vector<double>> filtered;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    LogRatioSeries z{{}, masks[i]};
    for (double r : ratios[i]) z.values.push_back(std::log(r));
    filtered.push_back(to_ratio_space(kalman_filter_sequence(z, KalmanParams(1e-6, 1.0))));
  }
  std::vector<RatioSample> after;
  for (std::size_t i = 0; i < filtered.size(); ++i) after.push_back({filtered[i], &masks[i]});
  const auto paired = dynamics_report(raw, after, {});
  CHECK(paired.after.switch_frequency < paired.before.switch_frequency);

  std::vector<RatioSample> shorter{{std::span(ratios[0]).first(10), nullptr}};
  CHECK_THROWS_AS(dynamics_report(raw, shorter, {}), InputError);
}

TEST_CASE("thread count does not change reports") {
  const auto traces = drift_log_ratios(12, {.length = 400}, 5);
  std::vector<std::vector<double>> ratios;
  for (const auto& z : traces) {
    ratios.emplace_back();
    for (double v : z.values) ratios.back().push_back(std::exp(v));
  }
  std::vector<RatioSample> samples;
  for (std::size_t i = 0; i < ratios.size(); ++i) samples.push_back({ratios[i], &traces[i].mask});
  const auto one = dynamics_over(samples, {}, 1);
  const auto four = dynamics_over(samples, {}, 4);
  CHECK(one.lfr == four.lfr);
  CHECK(one.switch_frequency == four.switch_frequency);
  CHECK(one.mean_run_lengths == four.mean_run_lengths);
  CHECK(one.windowed_local_variance == four.windowed_local_variance);
}

TEST_CASE("property: state accounting") {
  auto g = rf_test::rng_for(33);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rf_test::pick(g, 1, 300);
    std::vector<double> r(n);
    Mask mask(n);
    bool any = false;
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = std::exp(rf_test::uniform(g, -1e-3, 1e-3) * (g() % 3 == 0 ? 0.0 : 1.0));
      mask[t] = g() % 5 != 0;
      any = any || mask[t];
    }
    if (!any) continue;
    const std::size_t window = rf_test::pick(g, 2, 60);
    DiagnosticsOptions opts;
    opts.window = window;
    const DynamicsReport rep = sample_dynamics(r, mask, opts);
    CHECK(rep.proportions[0] + rep.proportions[1] + rep.proportions[2] == Approx(1.0).epsilon(1e-12));
    std::size_t total_runs = 0;
    for (std::size_t k = 0; k < kStateCount; ++k) {
      CHECK(static_cast<double>(rep.run_counts[k]) * rep.mean_run_lengths[k] ==
            Approx(static_cast<double>(rep.token_counts[k])).epsilon(1e-12));
      total_runs += rep.run_counts[k];
    }
    const StateSeries states = classify_token_states(r, mask, opts.band);
    const auto valid = states.valid_states();
    std::size_t switches = 0;
    for (std::size_t t = 1; t < valid.size(); ++t) switches += valid[t] != valid[t - 1];
    CHECK(total_runs - 1 <= switches);

    const double sf = switch_frequency(states, window);
    CHECK(sf >= 0.0);
    CHECK(sf <= 1.0);
    bool windows_constant = true;
    const std::size_t span = valid.size() < window ? valid.size() : valid.size() / window * window;
    const std::size_t w = valid.size() < window ? valid.size() : window;
    for (std::size_t t = 1; t < span; ++t)
      if (t % w != 0 && valid[t] != valid[t - 1]) windows_constant = false;
    CHECK((sf == 0.0) == windows_constant);

    CHECK(rep.lfr >= 0.0);
    CHECK(rep.lfr <= 1.0);
    CHECK(rep.global_variance >= 0.0);
    CHECK(rep.windowed_local_variance >= 0.0);
  }
}

TEST_CASE("property: lfr is monotone in the cutoff") {
  auto g = rf_test::rng_for(34);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = rf_test::normals(g, rf_test::pick(g, 1, 200));
    double prev = 0.0;
    for (std::size_t kc = 0; kc <= x.size() / 2; ++kc) {
      const double v = low_frequency_ratio(x, kc);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
    CHECK(low_frequency_ratio(x, x.size() / 2) == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("property: periodogram matches the direct transform and Parseval") {
  auto g = rf_test::rng_for(35);
  for (std::size_t n : {1, 2, 3, 16, 17, 64, 100, 256}) {
    const auto x = rf_test::normals(g, n);
    const auto fast = power_spectrum(x);
    const auto slow = direct_power(x);
    double energy = 0.0, total = 0.0;
    for (std::size_t t = 0; t < n; ++t) energy += x[t] * x[t];
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(fast[k] - slow[k]) <= 1e-9 * (1.0 + slow[k]));
      total += fast[k];
    }
    CHECK(std::abs(total - n * energy) <= 1e-9 * n * energy);
  }
}

}  // TEST_SUITE
