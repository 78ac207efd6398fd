#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "specdraft/draft_tree.hpp"
#include "specdraft/rng.hpp"

namespace specdraft {

/// Outcome of one verification call.
struct AcceptResult {
  /// Tree mode: accepted node indices from the root down. Chain mode: positions 0..n-1.
  std::vector<std::size_t> accepted_path;
  std::vector<TokenId> accepted_tokens;
  std::size_t accepted_len = 0;
  /// Token the target emits at the first position it did not accept.
  TokenId bonus_token = 0;
  /// Candidate tokens submitted to the target (|T2|, or the chain length).
  std::size_t tokens_verified = 0;
  /// 1-based rank of the deepest accepted node in T2; tokens_verified + 1 if none.
  std::size_t deepest_accepted_rank = 1;
};

/// Smallest id attaining the maximum probability.
inline TokenId argmax(const ProbDist& dist) noexcept { return dist.argmax(); }

/// min(1, p[t] / p_draft[t]). Throws ContractViolation when p_draft[t] == 0.
double accept_prob(const ProbDist& p, const ProbDist& p_draft, TokenId t);

/// normalize(max(0, p - p_draft)). Throws ContractViolation when the residual has no mass.
ProbDist residual_dist(const ProbDist& p, const ProbDist& p_draft);

/// Temperature-0 tree verification. Starting at the root, repeatedly takes the
/// target argmax given the accepted prefix and descends into the T2 child with
/// that token; stops at the first miss and emits the argmax there as the bonus.
AcceptResult verify_greedy(const LanguageModel& target, std::span<const TokenId> context, const DraftTree& tree,
                           const RerankedTree& selected);

/// A linear draft with the distribution each token was sampled from.
struct DraftChain {
  std::vector<TokenId> tokens;
  std::vector<ProbDist> dists;
};

/// Samples `length` tokens autoregressively from the draft model.
DraftChain sample_draft_chain(const LanguageModel& draft, std::span<const TokenId> context, std::size_t length,
                              RngStream& rng);

/// Speculative sampling over a single chain: token i survives with probability
/// accept_prob(p_i, q_i, t_i); the first rejection emits a residual sample and
/// discards the rest; a fully accepted chain emits a sample from the target.
AcceptResult verify_stochastic_chain(const LanguageModel& target, std::span<const TokenId> context,
                                     std::span<const TokenId> drafted, std::span<const ProbDist> draft_dists,
                                     RngStream& rng);

/// Accumulates the two device-independent cost metrics across verify calls.
class CallCounter {
 public:
  void record(const AcceptResult& result) noexcept {
    ++calls_;
    tokens_ += result.tokens_verified;
  }
  std::uint64_t calls() const noexcept { return calls_; }
  std::uint64_t tokens() const noexcept { return tokens_; }

 private:
  std::uint64_t calls_ = 0;
  std::uint64_t tokens_ = 0;
};

}  // namespace specdraft
