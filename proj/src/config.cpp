#include "ratio_forge/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "json.hpp"

#include "ratio_forge/errors.hpp"
#include "ratio_forge/trace_io.hpp"

namespace ratio_forge {

using nlohmann::json;

namespace {

[[noreturn]] void bad(std::string_view key, const std::string& what) {
  throw ParameterError("config key '" + std::string(key) + "': " + what);
}

double as_double(std::string_view key, const json& v) {
  if (!v.is_number()) bad(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(key, "expected a finite number");
  return x;
}

double at_least(std::string_view key, const json& v, double lo) {
  const double x = as_double(key, v);
  if (x < lo) bad(key, "must be >= " + std::to_string(lo));
  return x;
}

std::uint64_t as_count(std::string_view key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  bad(key, "expected a non-negative integer");
}

int as_small_int(std::string_view key, const json& v) {
  const std::uint64_t n = as_count(key, v);
  if (n > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) bad(key, "too large");
  return static_cast<int>(n);
}

std::string as_string(std::string_view key, const json& v) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

template <typename Parse>
auto as_enum(std::string_view key, const json& v, Parse parse) {
  try {
    return parse(as_string(key, v));
  } catch (const ParameterError& e) {
    bad(key, e.what());
  }
}

using Setter = std::function<void(RunConfig&, std::string_view, const json&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"kalman.q", [](RunConfig& c, auto k, const json& v) { c.kalman_q = at_least(k, v, 0.0); }},
      {"kalman.v",
       [](RunConfig& c, auto k, const json& v) {
         c.kalman_v = as_double(k, v);
         if (c.kalman_v <= 0.0) bad(k, "must be > 0");
       }},
      {"kalman.rho0", [](RunConfig& c, auto k, const json& v) { c.kalman_rho0 = as_double(k, v); }},
      {"kalman.p0", [](RunConfig& c, auto k, const json& v) { c.kalman_p0 = at_least(k, v, 0.0); }},
      {"kalman.saturation_bound",
       [](RunConfig& c, auto k, const json& v) { c.saturation_bound = as_double(k, v); }},
      {"clip.grpo.eps_lo", [](RunConfig& c, auto k, const json& v) { c.grpo_eps_lo = as_double(k, v); }},
      {"clip.grpo.eps_hi", [](RunConfig& c, auto k, const json& v) { c.grpo_eps_hi = as_double(k, v); }},
      {"clip.kpo.eps_lo", [](RunConfig& c, auto k, const json& v) { c.kpo_eps_lo = as_double(k, v); }},
      {"clip.kpo.eps_hi", [](RunConfig& c, auto k, const json& v) { c.kpo_eps_hi = as_double(k, v); }},
      {"clip.seq_level.eps_lo",
       [](RunConfig& c, auto k, const json& v) { c.seq_level_eps_lo = as_double(k, v); }},
      {"clip.seq_level.eps_hi",
       [](RunConfig& c, auto k, const json& v) { c.seq_level_eps_hi = as_double(k, v); }},
      {"objective.aggregation",
       [](RunConfig& c, auto k, const json& v) { c.aggregation = as_enum(k, v, parse_aggregation); }},
      {"diagnostics.window",
       [](RunConfig& c, auto k, const json& v) {
         c.window = as_count(k, v);
         if (c.window < 2) bad(k, "window must be >= 2");
       }},
      {"diagnostics.kc",
       [](RunConfig& c, auto k, const json& v) {
         if (v.is_null())
           c.kc.reset();
         else
           c.kc = as_count(k, v);
       }},
      {"diagnostics.band",
       [](RunConfig& c, auto k, const json& v) {
         const std::string s = as_string(k, v);
         if (s != "clip" && s != "exact") bad(k, "expected 'clip' or 'exact'");
         c.exact_band = s == "exact";
       }},
      {"diagnostics.exact_tol",
       [](RunConfig& c, auto k, const json& v) {
         c.exact_tol = as_double(k, v);
         if (c.exact_tol < 0.0) bad(k, "must be >= 0");
       }},
      {"diagnostics.representation",
       [](RunConfig& c, auto k, const json& v) {
         c.representation = as_enum(k, v, parse_representation);
       }},
      {"train.batch_size", [](RunConfig& c, auto k, const json& v) { c.train.batch_size = as_count(k, v); }},
      {"train.minibatch_size",
       [](RunConfig& c, auto k, const json& v) { c.train.minibatch_size = as_count(k, v); }},
      {"train.group_size", [](RunConfig& c, auto k, const json& v) { c.train.group_size = as_count(k, v); }},
      {"train.max_len", [](RunConfig& c, auto k, const json& v) { c.train.max_len = as_count(k, v); }},
      {"train.method",
       [](RunConfig& c, auto k, const json& v) { c.train.method = as_enum(k, v, parse_method); }},
      {"train.learning_rate",
       [](RunConfig& c, auto k, const json& v) { c.train.learning_rate = as_double(k, v); }},
      {"train.steps", [](RunConfig& c, auto k, const json& v) { c.train.steps = as_count(k, v); }},
      {"train.seed", [](RunConfig& c, auto k, const json& v) { c.train.seed = as_count(k, v); }},
      {"train.gradient_mode",
       [](RunConfig& c, auto k, const json& v) {
         c.train.gradient_mode = as_enum(k, v, parse_gradient_mode);
       }},
      {"train.vocab_size",
       [](RunConfig& c, auto k, const json& v) { c.train.policy.vocab_size = as_small_int(k, v); }},
      {"train.context_order",
       [](RunConfig& c, auto k, const json& v) { c.train.policy.context_order = as_small_int(k, v); }},
      {"train.num_prompts",
       [](RunConfig& c, auto k, const json& v) { c.train.policy.num_prompts = as_small_int(k, v); }},
      {"train.divergence_bound",
       [](RunConfig& c, auto k, const json& v) { c.train.divergence_bound = as_double(k, v); }},
  };
  return table;
}

void set_value(RunConfig& config, std::string_view key, const json& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ParameterError("unknown config key '" + std::string(key) + "'");
  it->second(config, key, value);
}

void apply_object(RunConfig& config, const json& obj, const std::string& prefix) {
  for (const auto& item : obj.items()) {
    const std::string key = prefix.empty() ? item.key() : prefix + "." + item.key();
    if (item.value().is_object())
      apply_object(config, item.value(), key);
    else
      set_value(config, key, item.value());
  }
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

KalmanParams RunConfig::kalman() const {
  return {kalman_q.value_or(1e-6), kalman_v, kalman_rho0, kalman_p0};
}

KalmanParams RunConfig::kalman_for(Method method) const {
  const double q = kalman_q.value_or(method == Method::kKpoUnclipped ? 1e-4 : 1e-6);
  return {q, kalman_v, kalman_rho0, kalman_p0};
}

ClipConfig RunConfig::clip_for(Method method) const {
  switch (method) {
    case Method::kGrpo:
      return {grpo_eps_lo, grpo_eps_hi};
    case Method::kSeqLevel:
      return {seq_level_eps_lo, seq_level_eps_hi};
    case Method::kKpoClipped:
    case Method::kKpoUnclipped:
      return {kpo_eps_lo, kpo_eps_hi};
  }
  return {};
}

DiagnosticsOptions RunConfig::diagnostics() const {
  DiagnosticsOptions o;
  o.band = exact_band ? StateBand::exact(exact_tol) : StateBand::clip({kpo_eps_lo, kpo_eps_hi});
  o.window = window;
  o.kc = kc;
  o.representation = representation;
  return o;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.kalman = kalman_for(t.method);
  t.clip = clip_for(t.method);
  t.aggregation = aggregation;
  t.saturation_bound = saturation_bound;
  return t;
}

void RunConfig::set(std::string_view key, std::string_view text) {
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = std::string(text);
  set_value(*this, key, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

void apply_config_text(RunConfig& config, std::string_view text, const std::string& source) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return;
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(source, line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  if (!root.is_object()) throw ParseError(source, 1, "config must be a JSON object");
  try {
    apply_object(config, root, "");
  } catch (const ParameterError& e) {
    throw ParameterError(source + ": " + e.what());
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  apply_config_text(config, read_text(path), path.string());
}

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig config;
  apply_config_file(config, path);
  return config;
}

}  // namespace ratio_forge
