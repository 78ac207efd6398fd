#include <cmath>
#include <map>

#include "doctest.h"
#include "specdraft/errors.hpp"
#include "specdraft/metrics.hpp"
#include "specdraft/verifier.hpp"
#include "support.hpp"

using namespace specdraft;
using testing::ConstantModel;
using testing::HashedModel;

namespace {

/// Target that always predicts the token after the last one (mod V).
class SuccessorModel final : public LanguageModel {
 public:
  explicit SuccessorModel(std::size_t v) : v_(v) {}
  std::size_t vocab_size() const noexcept override { return v_; }
  ProbDist next_dist(std::span<const TokenId> ctx) const override {
    const TokenId next = ctx.empty() ? 0 : static_cast<TokenId>((ctx.back() + 1) % v_);
    std::vector<double> w(v_, 0.1 / static_cast<double>(v_ - 1));
    w[next] = 0.9;
    return ProbDist::normalize(std::move(w));
  }

 private:
  std::size_t v_;
};

}  // namespace

TEST_CASE("greedy verification descends the selected tree") {
  // Draft: layer 1 = {a=0, b=1}; a expands to {a, b}.
  const ConstantModel draft(ProbDist({0.6, 0.3, 0.1}));
  const auto tree = expand(draft, std::vector<TokenId>{2}, 2, 2, 1);
  SUBCASE("target follows a then b") {
    // successor of 2 is 0, successor of 0 is 1, successor of 1 is 2
    const SuccessorModel target(3);
    const auto sel = rerank(tree, 4);
    const auto r = verify_greedy(target, std::vector<TokenId>{2}, tree, sel);
    CHECK(r.accepted_len == 2);
    CHECK(r.accepted_tokens == std::vector<TokenId>{0, 1});
    CHECK(r.bonus_token == 2);
    CHECK(r.tokens_verified == 4);
    CHECK(r.deepest_accepted_rank == *sel.rank(3));
    CHECK(tcr(r, sel) == r.deepest_accepted_rank);
  }
  SUBCASE("pruned child stops the walk") {
    const SuccessorModel target(3);
    const auto sel = rerank(tree, 3);  // #0, #2, #1 ; node #3 (a,b) pruned
    const auto r = verify_greedy(target, std::vector<TokenId>{2}, tree, sel);
    CHECK(r.accepted_len == 1);
    CHECK(r.bonus_token == 1);
    CHECK(r.deepest_accepted_rank == 1);
    CHECK(r.tokens_verified == 3);
  }
  SUBCASE("immediate miss") {
    const ConstantModel target(ProbDist({0.1, 0.1, 0.8}));
    const auto sel = rerank(tree, 3);
    const auto r = verify_greedy(target, std::vector<TokenId>{2}, tree, sel);
    CHECK(r.accepted_len == 0);
    CHECK(r.accepted_path.empty());
    CHECK(r.bonus_token == 2);
    CHECK(r.deepest_accepted_rank == 4);
  }
}

TEST_CASE("greedy verification matches target-only greedy decoding") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const HashedModel target(6, seed, 3.0);
    const HashedModel draft(6, seed + 1000, 3.0);
    const std::vector<TokenId> ctx{static_cast<TokenId>(seed % 6)};
    const auto tree = expand(draft, ctx, 4, 2, 3);
    const auto sel = rerank(tree, 1 + seed % 12);
    const auto r = verify_greedy(target, ctx, tree, sel);
    std::vector<TokenId> seq = ctx;
    for (std::size_t i = 0; i <= r.accepted_len; ++i) {
      const TokenId expected = target.next_dist(seq).argmax();
      const TokenId got = i < r.accepted_len ? r.accepted_tokens[i] : r.bonus_token;
      CHECK(got == expected);
      seq.push_back(expected);
    }
    CHECK(r.deepest_accepted_rank >= 1);
    CHECK(r.deepest_accepted_rank <= sel.size() + 1);
    for (std::size_t node : r.accepted_path) CHECK(sel.contains(node));
  }
}

TEST_CASE("acceptance probability and residual") {
  const ProbDist p({0.5, 0.5});
  const ProbDist q({0.9, 0.1});
  CHECK(accept_prob(p, q, 0) == doctest::Approx(5.0 / 9.0).epsilon(1e-15));
  CHECK(accept_prob(p, q, 1) == 1.0);
  const auto res = residual_dist(p, q);
  CHECK(res[0] == 0.0);
  CHECK(res[1] == doctest::Approx(1.0));
  const auto flipped = residual_dist(ProbDist({0.9, 0.1}), ProbDist({0.5, 0.5}));
  CHECK(flipped[0] == doctest::Approx(1.0));
  CHECK(flipped[1] == 0.0);
  CHECK_THROWS_AS(residual_dist(p, p), ContractViolation);
  CHECK_THROWS_AS(accept_prob(p, ProbDist({1.0, 0.0}), 1), ContractViolation);
}

TEST_CASE("stochastic chain verification preserves the target distribution") {
  // Empirical first-token distribution must match the target within sampling noise.
  const ProbDist p({0.5, 0.3, 0.15, 0.05});
  const ConstantModel target(p);
  const ConstantModel draft(ProbDist({0.1, 0.2, 0.3, 0.4}));
  constexpr int kTrials = 100000;
  std::vector<double> counts(4, 0.0);
  for (int i = 0; i < kTrials; ++i) {
    RngStream rng(99, static_cast<std::uint64_t>(i));
    const auto chain = sample_draft_chain(draft, std::vector<TokenId>{}, 3, rng);
    const auto r = verify_stochastic_chain(target, std::vector<TokenId>{}, chain.tokens, chain.dists, rng);
    const TokenId first = r.accepted_len > 0 ? r.accepted_tokens[0] : r.bonus_token;
    counts[first] += 1.0;
    CHECK(r.tokens_verified == 3);
  }
  for (auto& c : counts) c /= kTrials;
  CHECK(total_variation(ProbDist::normalize(counts), p) < 0.01);
}

TEST_CASE("stochastic chain with an identical draft accepts everything") {
  const HashedModel m(5, 3);
  RngStream rng(1, 0);
  const auto chain = sample_draft_chain(m, std::vector<TokenId>{1}, 6, rng);
  const auto r = verify_stochastic_chain(m, std::vector<TokenId>{1}, chain.tokens, chain.dists, rng);
  CHECK(r.accepted_len == 6);
  CHECK(r.accepted_tokens == chain.tokens);
}

TEST_CASE("call counter accumulates calls and tokens") {
  CallCounter counter;
  AcceptResult a;
  a.tokens_verified = 20;
  AcceptResult b;
  b.tokens_verified = 7;
  counter.record(a);
  counter.record(b);
  CHECK(counter.calls() == 2);
  CHECK(counter.tokens() == 27);
}
