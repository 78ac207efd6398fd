#include "specdraft/verifier.hpp"

#include <algorithm>

#include "specdraft/errors.hpp"

namespace specdraft {

double accept_prob(const ProbDist& p, const ProbDist& p_draft, TokenId t) {
  if (p.size() != p_draft.size() || t >= p.size()) throw ContractViolation("accept_prob: size mismatch");
  if (!(p_draft[t] > 0.0)) throw ContractViolation("accept_prob: draft assigns zero mass to the proposed token");
  return std::min(1.0, p[t] / p_draft[t]);
}

ProbDist residual_dist(const ProbDist& p, const ProbDist& p_draft) {
  if (p.size() != p_draft.size()) throw ContractViolation("residual_dist: size mismatch");
  std::vector<double> r(p.size());
  double total = 0.0;
  for (TokenId t = 0; t < p.size(); ++t) {
    r[t] = std::max(0.0, p[t] - p_draft[t]);
    total += r[t];
  }
  if (!(total > 0.0)) throw ContractViolation("residual_dist: residual has zero mass");
  return ProbDist::normalize(std::move(r));
}

AcceptResult verify_greedy(const LanguageModel& target, std::span<const TokenId> context, const DraftTree& tree,
                           const RerankedTree& selected) {
  AcceptResult result;
  result.tokens_verified = selected.size();
  std::vector<TokenId> prefix(context.begin(), context.end());
  std::int32_t current = kRootParent;
  for (;;) {
    const TokenId want = target.next_dist(prefix).argmax();
    std::optional<std::size_t> hit;
    for (std::size_t child : tree.children(current)) {
      if (tree.node(child).token == want && selected.contains(child)) {
        hit = child;
        break;
      }
    }
    if (!hit) {
      result.bonus_token = want;
      break;
    }
    result.accepted_path.push_back(*hit);
    result.accepted_tokens.push_back(want);
    prefix.push_back(want);
    current = static_cast<std::int32_t>(*hit);
  }
  result.accepted_len = result.accepted_path.size();
  result.deepest_accepted_rank =
      result.accepted_path.empty() ? selected.size() + 1 : *selected.rank(result.accepted_path.back());
  return result;
}

DraftChain sample_draft_chain(const LanguageModel& draft, std::span<const TokenId> context, std::size_t length,
                              RngStream& rng) {
  DraftChain chain;
  std::vector<TokenId> prefix(context.begin(), context.end());
  for (std::size_t i = 0; i < length; ++i) {
    ProbDist q = draft.next_dist(prefix);
    const TokenId t = q.sample(rng.uniform());
    chain.tokens.push_back(t);
    chain.dists.push_back(std::move(q));
    prefix.push_back(t);
  }
  return chain;
}

AcceptResult verify_stochastic_chain(const LanguageModel& target, std::span<const TokenId> context,
                                     std::span<const TokenId> drafted, std::span<const ProbDist> draft_dists,
                                     RngStream& rng) {
  if (drafted.size() != draft_dists.size()) {
    throw ContractViolation("verify_stochastic_chain: one draft distribution per drafted token is required");
  }
  AcceptResult result;
  result.tokens_verified = drafted.size();
  std::vector<TokenId> prefix(context.begin(), context.end());
  for (std::size_t i = 0; i < drafted.size(); ++i) {
    const ProbDist p = target.next_dist(prefix);
    const double a = accept_prob(p, draft_dists[i], drafted[i]);
    if (rng.uniform() >= a) {
      result.bonus_token = residual_dist(p, draft_dists[i]).sample(rng.uniform());
      result.accepted_len = i;
      result.deepest_accepted_rank = i == 0 ? drafted.size() + 1 : i;
      return result;
    }
    result.accepted_path.push_back(i);
    result.accepted_tokens.push_back(drafted[i]);
    prefix.push_back(drafted[i]);
  }
  result.accepted_len = drafted.size();
  result.deepest_accepted_rank = drafted.empty() ? 1 : drafted.size();
  result.bonus_token = target.next_dist(prefix).sample(rng.uniform());
  return result;
}

}  // namespace specdraft
