#include <algorithm>
#include <cmath>
#include <limits>

#include "specdraft/errors.hpp"
#include "specdraft/language_model.hpp"

namespace specdraft {

PlantedTemplateModel::PlantedTemplateModel(std::size_t vocab_size, std::vector<std::vector<TokenId>> templates,
                                           double rho)
    : vocab_size_(vocab_size), templates_(std::move(templates)), rho_(rho) {
  if (vocab_size_ < 2) throw ConfigError("planted model needs a vocabulary of at least 2");
  if (!(rho_ > 0.5 && rho_ <= 1.0)) throw ConfigError("planted model rho must lie in (0.5, 1]");
  for (const auto& t : templates_) {
    if (t.size() < 2) throw ConfigError("templates need at least 2 tokens");
    for (TokenId id : t) {
      if (id >= vocab_size_) throw ConfigError("template token outside the vocabulary");
    }
  }
}

std::optional<std::pair<std::size_t, std::size_t>> PlantedTemplateModel::locate(
    std::span<const TokenId> context) const {
  std::optional<std::pair<std::size_t, std::size_t>> best;
  for (std::size_t ti = 0; ti < templates_.size(); ++ti) {
    const auto& t = templates_[ti];
    // Longest proper prefix of t that is a suffix of the context.
    const std::size_t max_j = std::min(t.size() - 1, context.size());
    for (std::size_t j = max_j; j >= 1; --j) {
      if (best && j <= best->second) break;
      if (std::equal(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(j), context.end() - static_cast<std::ptrdiff_t>(j))) {
        best = {ti, j};
        break;
      }
    }
  }
  return best;
}

ProbDist PlantedTemplateModel::next_dist(std::span<const TokenId> context) const {
  const auto where = locate(context);
  if (!where) return ProbDist::uniform(vocab_size_);
  const TokenId next = templates_[where->first][where->second];
  std::vector<double> p(vocab_size_, (1.0 - rho_) / static_cast<double>(vocab_size_ - 1));
  p[next] = rho_;
  return ProbDist::normalize(std::move(p));
}

ProbDist perturb(const ProbDist& base, double temperature, double epsilon) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("draft temperature must be > 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("draft noise weight must lie in [0, 1]");
  const std::size_t v = base.size();
  if (temperature == 1.0 && epsilon == 0.0) return base;

  std::vector<double> tempered(base.probs().begin(), base.probs().end());
  if (temperature != 1.0) {
    constexpr double kFloor = std::numeric_limits<double>::min();
    double max_log = -std::numeric_limits<double>::infinity();
    for (double& p : tempered) {
      p = std::log(std::max(p, kFloor)) / temperature;
      max_log = std::max(max_log, p);
    }
    double total = 0.0;
    for (double& p : tempered) {
      p = std::exp(p - max_log);
      total += p;
    }
    for (double& p : tempered) p /= total;
  }
  const double noise = epsilon / static_cast<double>(v);
  for (double& p : tempered) p = (1.0 - epsilon) * p + noise;
  return ProbDist::normalize(std::move(tempered));
}

PerturbedDraftModel::PerturbedDraftModel(std::shared_ptr<const LanguageModel> base, double temperature,
                                         double epsilon)
    : base_(std::move(base)), temperature_(temperature), epsilon_(epsilon) {
  if (!base_) throw ConfigError("perturbed draft model needs a base model");
  // Validate once up front rather than on every call.
  (void)perturb(ProbDist::uniform(2), temperature_, epsilon_);
}

ProbDist PerturbedDraftModel::next_dist(std::span<const TokenId> context) const {
  return perturb(base_->next_dist(context), temperature_, epsilon_);
}

}  // namespace specdraft
