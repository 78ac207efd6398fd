#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace specdraft {

/// Index into a Vocabulary.
using TokenId = std::uint32_t;

/// Absolute tolerance on the sum of a ProbDist.
inline constexpr double kProbSumTolerance = 1e-9;

/// Normalized next-token distribution. Construction validates non-negativity
/// and unit mass, so every live ProbDist satisfies both.
class ProbDist {
 public:
  /// Takes ownership of already-normalized probabilities; throws ContractViolation otherwise.
  explicit ProbDist(std::vector<double> probs);

  /// Scales non-negative weights to unit mass. Throws on negative entries or zero total.
  static ProbDist normalize(std::vector<double> weights);
  static ProbDist uniform(std::size_t size);
  static ProbDist one_hot(std::size_t size, TokenId token);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](TokenId t) const noexcept { return probs_[t]; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// Smallest id attaining the maximum probability.
  TokenId argmax() const noexcept;

  /// Up to k ids with positive probability, most probable first, ties by smaller id.
  std::vector<TokenId> top_k(std::size_t k) const;

  /// Inverse-CDF draw for a uniform u in [0, 1). Never returns a zero-mass id.
  TokenId sample(double u) const noexcept;

  friend bool operator==(const ProbDist&, const ProbDist&) = default;

 private:
  std::vector<double> probs_;
};

/// Total-variation distance between two distributions of equal size.
double total_variation(const ProbDist& a, const ProbDist& b);

}  // namespace specdraft
