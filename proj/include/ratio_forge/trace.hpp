#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ratio_forge {

using Mask = std::vector<bool>;

// One sampled response with per-token log-probabilities (nats) under the
// behavior policy (logp_old) and the policy being optimized (logp_new).
struct TokenTrace {
  std::string sample_id;
  std::string group_id;
  std::vector<std::int64_t> tokens;
  std::vector<double> logp_old;
  std::vector<double> logp_new;
  Mask mask;
  double score = 0.0;

  std::size_t size() const { return tokens.size(); }
  std::size_t valid_count() const;

  friend bool operator==(const TokenTrace&, const TokenTrace&) = default;
};

// Throws ValidationError naming the first field that breaks an invariant:
// equal lengths, finite log-probs <= 0, score in [0, 1].
void validate_trace(const TokenTrace& trace);

}  // namespace ratio_forge
