#pragma once

// Small helpers shared by the unit tests: seeded generators and a scratch dir.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ratio_forge/trace.hpp"

namespace rf_test {

inline std::mt19937_64 rng_for(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), 0x5eedu};
  return std::mt19937_64(seq);
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline double log_uniform(std::mt19937_64& g, double lo, double hi) {
  return std::exp(uniform(g, std::log(lo), std::log(hi)));
}

inline std::size_t pick(std::mt19937_64& g, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(g);
}

inline std::vector<double> normals(std::mt19937_64& g, std::size_t n, double sigma = 1.0) {
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = d(g);
  return v;
}

// Random valid trace; about one token in five masked when `holes` is set.
inline ratio_forge::TokenTrace random_trace(std::mt19937_64& g, std::size_t max_len, bool holes) {
  ratio_forge::TokenTrace t;
  t.sample_id = "s" + std::to_string(g() % 100000);
  t.group_id = "g" + std::to_string(g() % 10);
  const std::size_t n = pick(g, 0, max_len);
  for (std::size_t i = 0; i < n; ++i) {
    t.tokens.push_back(static_cast<std::int64_t>(g() % 50000));
    t.logp_old.push_back(-log_uniform(g, 1e-6, 20.0));
    t.logp_new.push_back(g() % 7 == 0 ? 0.0 : -log_uniform(g, 1e-9, 30.0));
    t.mask.push_back(!holes || g() % 5 != 0);
  }
  t.score = g() % 3 == 0 ? uniform(g, 0.0, 1.0) : static_cast<double>(g() % 2);
  return t;
}

inline std::filesystem::path scratch(const std::string& name) {
  const std::filesystem::path dir = RF_TEST_TMP;
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace rf_test
