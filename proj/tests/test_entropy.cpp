#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "specdraft/entropy.hpp"
#include "specdraft/errors.hpp"
#include "support.hpp"

using namespace specdraft;
using testing::ConstantModel;
using testing::HashedModel;

TEST_CASE("top-k step entropy examples") {
  CHECK(topk_step_entropy(ProbDist({0.7, 0.2, 0.1}), 2) == doctest::Approx(0.5297061990576545).epsilon(1e-14));
  const ProbDist d({0.8, 0.2, 0.0});
  CHECK(topk_step_entropy(d, 2) == doctest::Approx(0.5004024235381879).epsilon(1e-14));
  CHECK(topk_step_entropy(ProbDist({0.6, 0.3, 0.1}), 2) == doctest::Approx(0.6365141682948128).epsilon(1e-14));
  CHECK(topk_step_entropy(ProbDist::uniform(4), 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(topk_step_entropy(ProbDist::one_hot(5, 3), 2) == 0.0);
  CHECK(topk_step_entropy(ProbDist({0.5, 0.5}), 1) == 0.0);
  CHECK(topk_step_entropy(ProbDist::uniform(3), 10) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(topk_step_entropy(d, 0), ConfigError);
}

TEST_CASE("cumulative entropy sums step entropies along the meta path") {
  const ConstantModel m(ProbDist({0.6, 0.3, 0.1}));
  const auto tree = expand(m, std::vector<TokenId>{}, 2, 2, 1);
  const auto path = select_meta_path(tree);
  REQUIRE(path.nodes.size() == 2);
  CHECK(cumulative_path_entropy(path, 2).nats == doctest::Approx(2 * 0.6365141682948128).epsilon(1e-14));
}

TEST_CASE("top-k entropy agrees with an extended-precision oracle") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t v = 2 + rng.below(30);
    std::vector<double> w(v);
    for (auto& x : w) x = rng.uniform() < 0.2 ? 0.0 : std::pow(rng.uniform(), 1.0 + 4.0 * rng.uniform());
    if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) w[0] = 1.0;
    const auto dist = ProbDist::normalize(std::move(w));
    const std::size_t k = 1 + rng.below(v + 2);
    const double h = topk_step_entropy(dist, k);
    CHECK(std::fabs(h - static_cast<double>(testing::entropy_oracle(dist.probs(), k))) <= 1e-9);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(std::min(k, v))) + 1e-12);
  }
}

TEST_CASE("top-k entropy is invariant under permuting ids") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> w(8);
    for (auto& x : w) x = rng.uniform();
    auto shuffled = w;
    for (std::size_t j = shuffled.size(); j > 1; --j) std::swap(shuffled[j - 1], shuffled[rng.below(j)]);
    for (std::size_t k : {1u, 2u, 3u, 8u}) {
      CHECK(topk_step_entropy(ProbDist::normalize(w), k) ==
            doctest::Approx(topk_step_entropy(ProbDist::normalize(shuffled), k)).epsilon(1e-13));
    }
  }
}

TEST_CASE("meta path picks the most confident base-depth step") {
  // Layer 2 children of token 0 see a sharper distribution than children of token 1.
  class Split final : public LanguageModel {
   public:
    std::size_t vocab_size() const noexcept override { return 3; }
    ProbDist next_dist(std::span<const TokenId> ctx) const override {
      if (ctx.empty()) return ProbDist({0.5, 0.4, 0.1});
      return ctx.back() == 1 ? ProbDist({0.05, 0.9, 0.05}) : ProbDist({0.4, 0.35, 0.25});
    }
  };
  const Split m;
  const auto tree = expand(m, std::vector<TokenId>{}, 2, 2, 2);
  const auto path = select_meta_path(tree);
  CHECK_FALSE(path.truncated);
  REQUIRE(path.nodes.size() == 2);
  CHECK(tree.node(path.nodes[0]).token == 1);
  CHECK(tree.node(path.nodes[1]).token == 1);
  CHECK(path.final_confidence == doctest::Approx(0.9));
  CHECK(path.step_dists.size() == 2);
  CHECK(path.step_dists[1] == tree.node(path.nodes[1]).step_dist.get());
}

TEST_CASE("meta path ties go to larger value then earlier insertion") {
  const ConstantModel m(ProbDist({0.6, 0.3, 0.1}));
  const auto tree = expand(m, std::vector<TokenId>{}, 3, 2, 2);
  const auto path = select_meta_path(tree);
  // Every step distribution is identical, so the highest-V leaf wins.
  const auto leaves = tree.layer(3);
  const auto best = std::min_element(leaves.begin(), leaves.end(), ranks_before);
  CHECK(path.nodes.back() == best->insertion_index);

  const ConstantModel flat(ProbDist::uniform(3));
  const auto flat_tree = expand(flat, std::vector<TokenId>{}, 2, 2, 2);
  CHECK(select_meta_path(flat_tree).nodes.back() == flat_tree.layer(2).front().insertion_index);
}

TEST_CASE("meta path stays at the base depth after extension") {
  const HashedModel m(6, 5, 2.0);
  const std::vector<TokenId> ctx{2};
  const auto base = expand(m, ctx, 4, 2, 3);
  const auto grown = extend(base, m, 3, 2, 3);
  const auto a = select_meta_path(base);
  const auto b = select_meta_path(grown);
  CHECK(a.nodes == b.nodes);
  CHECK(b.nodes.size() == 4);
  CHECK(b.nodes == grown.path_nodes(b.nodes.back()));
  CHECK(cumulative_path_entropy(a, 2).nats == cumulative_path_entropy(b, 2).nats);
}
