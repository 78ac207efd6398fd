#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "specdraft/prob_dist.hpp"
#include "specdraft/vocabulary.hpp"

namespace specdraft {

/// Ordered token prefix a model conditions on.
using Context = std::vector<TokenId>;

/// Next-token predictor. Implementations are immutable after construction,
/// so concurrent next_dist calls are safe.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const noexcept = 0;
  /// Deterministic in (model, context).
  virtual ProbDist next_dist(std::span<const TokenId> context) const = 0;
};

/// Count-based n-gram model with add-k smoothing at each order. A context that
/// was never observed backs off to its next-shorter suffix, ending at the
/// add-k unigram.
class NGramModel final : public LanguageModel {
 public:
  /// Throws ConfigError when order < 1 or smoothing <= 0.
  static NGramModel train(const Vocabulary& vocab, const std::vector<std::vector<TokenId>>& documents,
                          int order, double smoothing);
  static NGramModel train(const Vocabulary& vocab, const Corpus& corpus, int order, double smoothing);

  std::size_t vocab_size() const noexcept override { return vocab_.size(); }
  ProbDist next_dist(std::span<const TokenId> context) const override;

  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  int order() const noexcept { return order_; }
  double smoothing() const noexcept { return smoothing_; }

  /// Successor counts of one context, sorted by token id.
  struct ContextCounts {
    std::vector<std::pair<TokenId, std::uint32_t>> successors;
    std::uint64_t total = 0;
    friend bool operator==(const ContextCounts&, const ContextCounts&) = default;
  };

  /// Counts for an exact context (length < order), or nullptr when unseen.
  const ContextCounts* counts(std::span<const TokenId> context) const;

  /// Versioned text format: key-value header followed by one record per context.
  void save(const std::string& path) const;
  void write(std::ostream& out) const;
  static NGramModel load(const std::string& path);
  static NGramModel read(std::istream& in);

  friend bool operator==(const NGramModel& a, const NGramModel& b) {
    return a.order_ == b.order_ && a.smoothing_ == b.smoothing_ && a.vocab_ == b.vocab_ &&
           a.tables_ == b.tables_;
  }

 private:
  NGramModel(Vocabulary vocab, int order, double smoothing);

  Vocabulary vocab_;
  int order_;
  double smoothing_;
  // tables_[m] maps an m-token context (packed bytes) to its successor counts.
  std::vector<std::unordered_map<std::string, ContextCounts>> tables_;
};

/// Synthetic target with planted high-probability templates. If the context
/// ends inside a template (its suffix equals a proper template prefix, longest
/// match wins, ties to the lower template index), the next template token gets
/// mass rho and the rest is uniform; otherwise the distribution is uniform.
class PlantedTemplateModel final : public LanguageModel {
 public:
  /// Throws ConfigError unless rho is in (0.5, 1], vocab_size >= 2, and every
  /// template has at least 2 valid tokens.
  PlantedTemplateModel(std::size_t vocab_size, std::vector<std::vector<TokenId>> templates, double rho);

  std::size_t vocab_size() const noexcept override { return vocab_size_; }
  ProbDist next_dist(std::span<const TokenId> context) const override;

  const std::vector<std::vector<TokenId>>& templates() const noexcept { return templates_; }
  double rho() const noexcept { return rho_; }

  /// (template index, offset of the next template token) when inside a template.
  std::optional<std::pair<std::size_t, std::size_t>> locate(std::span<const TokenId> context) const;

 private:
  std::size_t vocab_size_;
  std::vector<std::vector<TokenId>> templates_;
  double rho_;
};

/// normalize((1 - epsilon) * softmax(log p / temperature) + epsilon * uniform).
/// Zero entries are floored at the smallest normal double before tempering so a
/// very high temperature flattens even one-hot inputs; (1, 0) is an exact identity.
/// Throws ConfigError when temperature <= 0 or epsilon is outside [0, 1].
ProbDist perturb(const ProbDist& base, double temperature, double epsilon);

/// Draft surrogate: a tempered, noise-mixed view of another model.
class PerturbedDraftModel final : public LanguageModel {
 public:
  PerturbedDraftModel(std::shared_ptr<const LanguageModel> base, double temperature, double epsilon);

  std::size_t vocab_size() const noexcept override { return base_->vocab_size(); }
  ProbDist next_dist(std::span<const TokenId> context) const override;

  double temperature() const noexcept { return temperature_; }
  double epsilon() const noexcept { return epsilon_; }

 private:
  std::shared_ptr<const LanguageModel> base_;
  double temperature_;
  double epsilon_;
};

}  // namespace specdraft
