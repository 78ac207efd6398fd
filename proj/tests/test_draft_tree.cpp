#include <cmath>
#include <set>

#include "doctest.h"
#include "specdraft/draft_tree.hpp"
#include "specdraft/errors.hpp"
#include "support.hpp"

using namespace specdraft;
using testing::ConstantModel;
using testing::HashedModel;

namespace {

void check_tree_invariants(const DraftTree& tree) {
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    CHECK(n.insertion_index == i);
    CHECK(n.confidence > 0.0);
    CHECK(n.confidence <= 1.0);
    CHECK(n.depth <= tree.depth());
    if (n.parent == kRootParent) {
      CHECK(n.depth == 1);
      CHECK(n.value() == doctest::Approx(n.confidence).epsilon(1e-12));
    } else {
      const auto& p = tree.node(static_cast<std::size_t>(n.parent));
      CHECK(n.depth == p.depth + 1);
      CHECK(n.log_value <= p.log_value);
      CHECK(n.value() == doctest::Approx(p.value() * n.confidence).epsilon(1e-12));
    }
  }
  // Siblings carry distinct tokens.
  for (std::size_t i = 0; i < tree.size(); ++i) {
    std::set<TokenId> seen;
    for (std::size_t c : tree.children(static_cast<std::int32_t>(i))) CHECK(seen.insert(tree.node(c).token).second);
  }
}

}  // namespace

TEST_CASE("layer one holds the top-k root tokens") {
  const ConstantModel m(ProbDist({0.7, 0.2, 0.1}));
  const auto tree = expand(m, std::vector<TokenId>{}, 1, 2, 10);
  REQUIRE(tree.size() == 2);
  CHECK(tree.node(0).token == 0);
  CHECK(tree.node(0).confidence == 0.7);
  CHECK(tree.node(0).value() == doctest::Approx(0.7));
  CHECK(tree.node(1).token == 1);
  CHECK(tree.node(1).value() == doctest::Approx(0.2));
}

TEST_CASE("value is the product of confidences") {
  const ConstantModel m(ProbDist({0.9, 0.1}));
  const auto tree = expand(m, std::vector<TokenId>{}, 2, 1, 1);
  REQUIRE(tree.size() == 2);
  CHECK(tree.node(1).value() == doctest::Approx(0.81));
  DraftNode leaf;
  leaf.log_value = std::log(0.9) + std::log(0.8);
  CHECK(leaf.value() == doctest::Approx(0.72));
}

TEST_CASE("node count under the layer expansion rule") {
  const HashedModel m(6, 1);
  const auto tree = expand(m, std::vector<TokenId>{0}, 5, 2, 2);
  CHECK(tree.size() == 18);
  CHECK(tree.layer(1).size() == 2);
  for (int d = 2; d <= 5; ++d) CHECK(tree.layer(d).size() == 4);
  CHECK(tree.layer(6).empty());
}

TEST_CASE("frontier expansion picks the highest-value nodes") {
  const HashedModel m(8, 11);
  const auto tree = expand(m, std::vector<TokenId>{3}, 3, 3, 2);
  // Parents of layer 3 are exactly the two best nodes of layer 2.
  const auto layer2 = tree.layer(2);
  std::vector<std::size_t> idx;
  for (const auto& n : layer2) idx.push_back(n.insertion_index);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ranks_before(tree.node(a), tree.node(b)); });
  std::set<std::size_t> expected(idx.begin(), idx.begin() + 2);
  std::set<std::size_t> parents;
  for (const auto& n : tree.layer(3)) parents.insert(static_cast<std::size_t>(n.parent));
  CHECK(parents == expected);
}

TEST_CASE("zero-probability children are never created") {
  const ConstantModel m(ProbDist({1.0, 0.0, 0.0}));
  const auto tree = expand(m, std::vector<TokenId>{}, 4, 3, 10);
  CHECK(tree.size() == 4);
  for (const auto& n : tree.nodes()) CHECK(n.token == 0);
}

TEST_CASE("expand rejects degenerate shapes") {
  const HashedModel m(4, 1);
  CHECK_THROWS_AS(expand(m, std::vector<TokenId>{}, 0, 2, 10), ConfigError);
  CHECK_THROWS_AS(expand(m, std::vector<TokenId>{}, 3, 0, 10), ConfigError);
  CHECK_THROWS_AS(expand(m, std::vector<TokenId>{}, 3, 2, 0), ConfigError);
  CHECK_THROWS_AS(rerank(expand(m, std::vector<TokenId>{}, 2, 2, 2), 0), ConfigError);
  CHECK_THROWS_AS(extend(expand(m, std::vector<TokenId>{}, 2, 2, 2), m, 0, 2, 2), ConfigError);
}

TEST_CASE("extend is equivalent to expanding deeper") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const HashedModel m(7, seed, 2.0);
    const std::vector<TokenId> ctx{1, 2};
    const auto deep = expand(m, ctx, 8, 2, 3);
    const auto grown = extend(expand(m, ctx, 5, 2, 3), m, 3, 2, 3);
    REQUIRE(deep.size() == grown.size());
    CHECK(grown.depth() == 8);
    CHECK(grown.base_depth() == 5);
    for (std::size_t i = 0; i < deep.size(); ++i) {
      CHECK(deep.node(i).token == grown.node(i).token);
      CHECK(deep.node(i).parent == grown.node(i).parent);
      CHECK(deep.node(i).log_value == grown.node(i).log_value);
      CHECK(*deep.node(i).step_dist == *grown.node(i).step_dist);
    }
  }
}

TEST_CASE("extended planted layers keep confidence rho") {
  const double rho = 0.95;
  std::vector<TokenId> tmpl;
  for (TokenId t = 0; t < 12; ++t) tmpl.push_back(t);
  const PlantedTemplateModel m(16, {tmpl}, rho);
  const std::vector<TokenId> ctx{0};
  const auto tree = extend(expand(m, ctx, 5, 2, 10), m, 3, 2, 10);
  double best = 0.0;
  for (const auto& n : tree.layer(8)) best = std::max(best, n.value());
  CHECK(best == doctest::Approx(std::pow(rho, 8)).epsilon(1e-12));
}

TEST_CASE("rerank saturates and prefers shallow nodes on a chain") {
  const ConstantModel chain(ProbDist({0.9, 0.1}));
  const auto tree = expand(chain, std::vector<TokenId>{}, 3, 1, 1);
  const auto all = rerank(tree, 50);
  CHECK(all.size() == tree.size());
  const auto two = rerank(tree, 2);
  CHECK(two.nodes() == std::vector<std::size_t>{0, 1});
  CHECK(two.rank(1) == 2u);
  CHECK_FALSE(two.rank(2).has_value());
  CHECK_FALSE(two.contains(2));
}

TEST_CASE("rerank matches a sort oracle and stays root-connected") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int levels = trial % 3 == 0 ? 4 : 0;  // quantized weights force V ties
    const HashedModel m(3 + rng.below(6), rng.next_u64(), 0.5 + 3.0 * rng.uniform(), levels,
                        trial % 5 == 0 ? 0.3 : 0.0);
    const int depth = 1 + static_cast<int>(rng.below(6));
    const int k = 1 + static_cast<int>(rng.below(4));
    const int width = 1 + static_cast<int>(rng.below(3));
    const auto tree = expand(m, std::vector<TokenId>{static_cast<TokenId>(trial % 3)}, depth, k, width);
    REQUIRE(tree.size() <= 64);
    check_tree_invariants(tree);
    const std::size_t n = 1 + rng.below(tree.size() + 3);
    const auto sel = rerank(tree, n);
    CHECK(sel.nodes() == testing::rerank_oracle(tree, n));
    CHECK(sel.size() == std::min(n, tree.size()));
    std::set<std::size_t> seen;
    for (std::size_t i : sel.nodes()) {
      const auto parent = tree.node(i).parent;
      CHECK((parent == kRootParent || seen.count(static_cast<std::size_t>(parent)) == 1));
      seen.insert(i);
    }
  }
}

TEST_CASE("identical inputs give identical trees") {
  const HashedModel m(9, 77, 1.5);
  const auto a = expand(m, std::vector<TokenId>{4, 4}, 5, 3, 4);
  const auto b = expand(m, std::vector<TokenId>{4, 4}, 5, 3, 4);
  CHECK(dump(a) == dump(b));
}

TEST_CASE("dump golden") {
  const ConstantModel m(ProbDist({0.6, 0.3, 0.1}));
  const auto tree = expand(m, std::vector<TokenId>{}, 2, 2, 1);
  const auto sel = rerank(tree, 3);
  const Vocabulary vocab({"x", "y", "<unk>"}, TokenizationMode::kCharacter);
  const std::string expected =
      "tree depth=2 base_depth=2 top_k=2 expand_width=1 nodes=4\n"
      "*#0 tok=0 'x' c=0.600000 V=0.600000 d=1\n"
      "  *#2 tok=0 'x' c=0.600000 V=0.360000 d=2\n"
      "  #3 tok=1 'y' c=0.300000 V=0.180000 d=2\n"
      "*#1 tok=1 'y' c=0.300000 V=0.300000 d=1\n";
  CHECK(dump(tree, &sel, &vocab) == expected);
}
