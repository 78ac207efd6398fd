#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "specdraft/binning.hpp"
#include "specdraft/language_model.hpp"
#include "specdraft/metrics.hpp"

namespace specdraft {

/// ceil(depth / 2), the default extension budget.
constexpr int default_alpha(int depth) noexcept { return (depth + 1) / 2; }

/// Tree shape and adaptation policy for one decoding session.
struct HeteroConfig {
  int depth = 5;
  int top_k = 2;
  std::size_t top_n = 20;
  int expand_width = 10;
  int alpha = default_alpha(5);
  /// Candidate-budget multiplier per low bin, indexed by bin.
  std::vector<double> gamma{0.3, 0.6, 1.0};
  std::vector<std::size_t> low_bins{0, 1, 2};
  std::size_t entropy_k = 2;
  std::size_t max_new_tokens = 200;
  std::uint64_t seed = 0;
  /// Generation stops after this token is emitted.
  std::optional<TokenId> terminator;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Per-iteration decision for an entropy bin.
struct Adaptation {
  int extra_layers = 0;
  std::size_t top_n = 0;

  friend bool operator==(const Adaptation&, const Adaptation&) = default;
};

/// Low bins extend by max(0, alpha - i) layers and use
/// max(1, round_half_up(gamma_i * top_n) + max(0, alpha - i)) candidates; other bins keep the defaults.
Adaptation adapt(std::size_t bin, const HeteroConfig& config);

struct GenerationResult {
  std::vector<TokenId> tokens;
  std::vector<IterationRecord> records;
  RunSummary summary;
};

/// Fixed-shape draft tree decoding: expand to depth d, keep the top_n nodes,
/// verify greedily, emit accepted tokens plus the bonus. When `bins` is given the
/// entropy bin is recorded but never acted on.
GenerationResult decode_baseline(const LanguageModel& target, const LanguageModel& draft,
                                 std::span<const TokenId> prompt, const HeteroConfig& config,
                                 const BinningModel* bins = nullptr, const CostModel& cost = {});

/// Entropy-adaptive decoding: after expanding to depth d, the meta-path entropy
/// selects a bin; low bins deepen the tree and shrink the rerank budget before
/// verification. The entropy is measured once per iteration, before extension.
GenerationResult decode_adaptive(const LanguageModel& target, const LanguageModel& draft,
                                 std::span<const TokenId> prompt, const HeteroConfig& config,
                                 const BinningModel& bins, const CostModel& cost = {});

/// Plain target-only greedy decoding; the reference both speculative loops must reproduce.
std::vector<TokenId> decode_target_greedy(const LanguageModel& target, std::span<const TokenId> prompt,
                                          std::size_t max_new_tokens, std::optional<TokenId> terminator = {});

/// Paired arms over identical prompts.
struct ComparisonResult {
  GenerationResult baseline;  ///< tokens concatenated over prompts, records tagged by prompt
  GenerationResult adaptive;
};

/// Runs both arms on every prompt (optionally on several threads; results are
/// merged in prompt order). Throws OutputMismatch if any prompt's outputs differ.
ComparisonResult run_comparison(const LanguageModel& target, const LanguageModel& draft,
                                std::span<const std::vector<TokenId>> prompts, const HeteroConfig& config,
                                const BinningModel& bins, const CostModel& cost = {}, unsigned threads = 1);

/// Runs one arm over many prompts, merging records in prompt order.
GenerationResult run_arm(const LanguageModel& target, const LanguageModel& draft,
                         std::span<const std::vector<TokenId>> prompts, const HeteroConfig& config,
                         const BinningModel* bins, bool adaptive, const CostModel& cost = {}, unsigned threads = 1);

}  // namespace specdraft
