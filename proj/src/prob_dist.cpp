#include "specdraft/prob_dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "specdraft/errors.hpp"

namespace specdraft {

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ContractViolation("ProbDist: empty probability vector");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractViolation("ProbDist: negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw ContractViolation("ProbDist: entries sum to " + std::to_string(sum));
  }
}

ProbDist ProbDist::normalize(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractViolation("normalize: negative or non-finite weight");
    total += w;
  }
  if (!(total > 0.0)) throw ContractViolation("normalize: zero total mass");
  for (double& w : weights) w /= total;
  return ProbDist(std::move(weights));
}

ProbDist ProbDist::uniform(std::size_t size) {
  if (size == 0) throw ContractViolation("uniform: empty vocabulary");
  return ProbDist(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

ProbDist ProbDist::one_hot(std::size_t size, TokenId token) {
  if (token >= size) throw ContractViolation("one_hot: token out of range");
  std::vector<double> p(size, 0.0);
  p[token] = 1.0;
  return ProbDist(std::move(p));
}

TokenId ProbDist::argmax() const noexcept {
  // max_element returns the first maximum, i.e. the smallest id.
  return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

std::vector<TokenId> ProbDist::top_k(std::size_t k) const {
  std::vector<TokenId> ids;
  ids.reserve(probs_.size());
  for (TokenId t = 0; t < probs_.size(); ++t) {
    if (probs_[t] > 0.0) ids.push_back(t);
  }
  const auto by_prob = [this](TokenId a, TokenId b) {
    if (probs_[a] != probs_[b]) return probs_[a] > probs_[b];
    return a < b;
  };
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), by_prob);
  ids.resize(k);
  return ids;
}

TokenId ProbDist::sample(double u) const noexcept {
  double cdf = 0.0;
  TokenId last_positive = 0;
  for (TokenId t = 0; t < probs_.size(); ++t) {
    if (probs_[t] <= 0.0) continue;
    last_positive = t;
    cdf += probs_[t];
    if (u < cdf) return t;
  }
  // Rounding left the cdf just short of 1.
  return last_positive;
}

double total_variation(const ProbDist& a, const ProbDist& b) {
  if (a.size() != b.size()) throw ContractViolation("total_variation: size mismatch");
  double tv = 0.0;
  for (TokenId t = 0; t < a.size(); ++t) tv += std::abs(a[t] - b[t]);
  return 0.5 * tv;
}

}  // namespace specdraft
