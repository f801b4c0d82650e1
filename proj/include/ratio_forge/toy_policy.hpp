#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ratio_forge {

struct PolicyShape {
  int vocab_size = 8;
  int context_order = 1;  // previous tokens visible to the policy
  int num_prompts = 8;
  int eos_token = 0;
};

// Tabular autoregressive softmax policy. A context is (prompt, last k tokens),
// with positions before the start of the response padded by a BOS code.
class ToyPolicy {
 public:
  explicit ToyPolicy(PolicyShape shape = {});

  const PolicyShape& shape() const { return shape_; }
  int vocab_size() const { return shape_.vocab_size; }
  std::size_t num_contexts() const { return contexts_; }
  std::size_t num_parameters() const { return logits_.size(); }

  // Context of the token at position prefix.size(), given the tokens before it.
  std::size_t context_index(int prompt, std::span<const std::int64_t> prefix) const;

  std::span<const double> logits(std::size_t ctx) const;
  std::span<double> logits(std::size_t ctx);

  std::span<const double> parameters() const { return logits_; }
  std::span<double> parameters() { return logits_; }

  void log_softmax(std::size_t ctx, std::span<double> out) const;
  double log_prob(std::size_t ctx, std::int64_t token) const;
  double entropy(std::size_t ctx) const;

  // Largest |theta|; +inf if any parameter is not finite.
  double max_abs() const;

 private:
  PolicyShape shape_;
  std::size_t contexts_per_prompt_ = 0;
  std::size_t contexts_ = 0;
  std::vector<double> logits_;
};

}  // namespace ratio_forge
