#include "ratio_forge/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ratio_forge/errors.hpp"

namespace ratio_forge {

ToyPolicy::ToyPolicy(PolicyShape shape) : shape_(shape) {
  if (shape.vocab_size < 2) throw ParameterError("vocab_size must be >= 2");
  if (shape.context_order < 0 || shape.context_order > 4)
    throw ParameterError("context_order must be in [0, 4]");
  if (shape.num_prompts < 1) throw ParameterError("num_prompts must be >= 1");
  if (shape.eos_token < 0 || shape.eos_token >= shape.vocab_size)
    throw ParameterError("eos_token must be a vocabulary id");
  contexts_per_prompt_ = 1;
  for (int k = 0; k < shape.context_order; ++k)
    contexts_per_prompt_ *= static_cast<std::size_t>(shape.vocab_size + 1);
  contexts_ = contexts_per_prompt_ * static_cast<std::size_t>(shape.num_prompts);
  logits_.assign(contexts_ * static_cast<std::size_t>(shape.vocab_size), 0.0);
}

std::size_t ToyPolicy::context_index(int prompt, std::span<const std::int64_t> prefix) const {
  if (prompt < 0 || prompt >= shape_.num_prompts)
    throw InputError("prompt " + std::to_string(prompt) + " out of range");
  const auto base = static_cast<std::size_t>(shape_.vocab_size + 1);
  const auto bos = static_cast<std::size_t>(shape_.vocab_size);
  std::size_t index = 0;
  for (int j = 1; j <= shape_.context_order; ++j) {
    std::size_t code = bos;
    if (static_cast<std::size_t>(j) <= prefix.size()) {
      const std::int64_t tok = prefix[prefix.size() - static_cast<std::size_t>(j)];
      if (tok < 0 || tok >= shape_.vocab_size)
        throw InputError("token " + std::to_string(tok) + " outside the vocabulary");
      code = static_cast<std::size_t>(tok);
    }
    index = index * base + code;
  }
  return static_cast<std::size_t>(prompt) * contexts_per_prompt_ + index;
}

std::span<const double> ToyPolicy::logits(std::size_t ctx) const {
  const auto v = static_cast<std::size_t>(shape_.vocab_size);
  return {logits_.data() + ctx * v, v};
}

std::span<double> ToyPolicy::logits(std::size_t ctx) {
  const auto v = static_cast<std::size_t>(shape_.vocab_size);
  return {logits_.data() + ctx * v, v};
}

void ToyPolicy::log_softmax(std::size_t ctx, std::span<double> out) const {
  const auto row = logits(ctx);
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double l : row) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t a = 0; a < row.size(); ++a) out[a] = row[a] - lse;
}

double ToyPolicy::log_prob(std::size_t ctx, std::int64_t token) const {
  if (token < 0 || token >= shape_.vocab_size)
    throw InputError("token " + std::to_string(token) + " outside the vocabulary");
  std::vector<double> lp(static_cast<std::size_t>(shape_.vocab_size));
  log_softmax(ctx, lp);
  return lp[static_cast<std::size_t>(token)];
}

double ToyPolicy::entropy(std::size_t ctx) const {
  std::vector<double> lp(static_cast<std::size_t>(shape_.vocab_size));
  log_softmax(ctx, lp);
  double h = 0.0;
  for (double l : lp) h -= std::exp(l) * l;
  return std::clamp(h, 0.0, std::log(static_cast<double>(shape_.vocab_size)));
}

double ToyPolicy::max_abs() const {
  double m = 0.0;
  for (double x : logits_) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::abs(x));
  }
  return m;
}

}  // namespace ratio_forge
