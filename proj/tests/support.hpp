#pragma once

// Test-only models and independent reference implementations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "specdraft/binning.hpp"
#include "specdraft/draft_tree.hpp"
#include "specdraft/language_model.hpp"
#include "specdraft/prob_dist.hpp"
#include "specdraft/rng.hpp"

namespace specdraft::testing {

/// Context-hashed random model: every context gets its own pseudo-random
/// distribution. `sharpness` > 1 concentrates mass; `levels` > 0 quantizes
/// weights to that many steps, which produces exact ties in V.
class HashedModel final : public LanguageModel {
 public:
  HashedModel(std::size_t vocab, std::uint64_t seed, double sharpness = 1.0, int levels = 0, double zero_rate = 0.0)
      : vocab_(vocab), seed_(seed), sharpness_(sharpness), levels_(levels), zero_rate_(zero_rate) {}

  std::size_t vocab_size() const noexcept override { return vocab_; }

  ProbDist next_dist(std::span<const TokenId> context) const override {
    std::uint64_t h = mix64(seed_);
    for (TokenId t : context) h = mix64(h ^ (t + 0x9e37ULL));
    std::vector<double> w(vocab_);
    for (std::size_t i = 0; i < vocab_; ++i) {
      const std::uint64_t bits = mix64(h + i * 0x632be59bd9b4e019ULL);
      double u = to_unit(bits);
      if (levels_ > 0) u = std::floor(u * levels_) / levels_ + 1.0 / levels_;
      w[i] = std::pow(u, sharpness_);
      if (zero_rate_ > 0 && to_unit(mix64(bits)) < zero_rate_) w[i] = 0.0;
    }
    if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) w[h % vocab_] = 1.0;
    return ProbDist::normalize(std::move(w));
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
  double sharpness_;
  int levels_;
  double zero_rate_;
};

/// Fixed distribution regardless of context.
class ConstantModel final : public LanguageModel {
 public:
  explicit ConstantModel(ProbDist dist) : dist_(std::move(dist)) {}
  std::size_t vocab_size() const noexcept override { return dist_.size(); }
  ProbDist next_dist(std::span<const TokenId>) const override { return dist_; }

 private:
  ProbDist dist_;
};

/// Extended-precision Top-K entropy computed directly from the definition.
inline long double entropy_oracle(std::span<const double> probs, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < probs.size(); ++i) order.emplace_back(probs[i], i);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  k = std::min(k, order.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < k; ++i) total += order[i].first;
  long double h = 0.0L;
  for (std::size_t i = 0; i < k; ++i) {
    const long double p = order[i].first / total;
    if (p > 0.0L) h -= p * std::log(p);
  }
  return h;
}

/// Rerank oracle: full sort of every node by (V desc, depth asc, insertion asc), truncated to N.
inline std::vector<std::size_t> rerank_oracle(const DraftTree& tree, std::size_t n) {
  std::vector<std::size_t> idx(tree.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = tree.node(a);
    const auto& y = tree.node(b);
    if (x.log_value != y.log_value) return x.log_value > y.log_value;
    if (x.depth != y.depth) return x.depth < y.depth;
    return a < b;
  });
  idx.resize(std::min(n, idx.size()));
  return idx;
}

/// Long-double two-pass leaf loss.
inline long double loss_oracle(const std::vector<CalibrationSample>& s, SplitCriterion c) {
  if (s.empty()) return 0.0L;
  long double mean = 0.0L;
  for (const auto& v : s) mean += v.y;
  mean /= s.size();
  long double sse = 0.0L;
  for (const auto& v : s) sse += (v.y - mean) * (v.y - mean);
  return c == SplitCriterion::kNormalizedVariance ? sse / s.size() : sse;
}

/// Exhaustive greedy CART: at every node, try every midpoint between
/// consecutive distinct x and keep the lowest loss (smaller threshold on
/// near-ties); returns the summed leaf loss of the resulting tree.
inline long double cart_oracle(std::vector<CalibrationSample> node, int depth, SplitCriterion c) {
  auto equal_y = std::all_of(node.begin(), node.end(), [&](const auto& s) { return s.y == node.front().y; });
  std::vector<double> xs;
  for (const auto& s : node) xs.push_back(s.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  if (depth == 0 || node.size() < 2 || equal_y || xs.size() < 2) return loss_oracle(node, c);

  long double best = std::numeric_limits<long double>::infinity();
  std::vector<std::pair<double, long double>> scored;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double t = xs[i] + (xs[i + 1] - xs[i]) / 2.0;
    if (!(t > xs[i])) t = xs[i + 1];
    std::vector<CalibrationSample> l, r;
    for (const auto& s : node) (s.x < t ? l : r).push_back(s);
    const long double loss = loss_oracle(l, c) + loss_oracle(r, c);
    scored.emplace_back(t, loss);
    best = std::min(best, loss);
  }
  const long double tol = 1e-12L * (1.0L + std::fabs(best));
  double threshold = 0.0;
  for (const auto& [t, loss] : scored) {
    if (loss <= best + tol) {
      threshold = t;
      break;
    }
  }
  std::vector<CalibrationSample> l, r;
  for (const auto& s : node) (s.x < threshold ? l : r).push_back(s);
  return cart_oracle(std::move(l), depth - 1, c) + cart_oracle(std::move(r), depth - 1, c);
}

}  // namespace specdraft::testing
