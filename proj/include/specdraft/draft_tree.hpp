#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specdraft/language_model.hpp"

namespace specdraft {

inline constexpr std::int32_t kRootParent = -1;

/// One drafted token. `step_dist` is the draft distribution the token was
/// chosen from (shared by siblings); `log_value` is ln V, the summed log
/// confidences along the path from the root.
struct DraftNode {
  TokenId token = 0;
  double confidence = 0.0;
  double log_value = 0.0;
  int depth = 0;
  std::int32_t parent = kRootParent;
  std::size_t insertion_index = 0;
  std::shared_ptr<const ProbDist> step_dist;

  double value() const noexcept { return std::exp(log_value); }
};

/// Strict "ranks before" order on nodes: larger V, then smaller depth, then
/// earlier insertion. Ancestors always rank before their descendants.
inline bool ranks_before(const DraftNode& a, const DraftNode& b) noexcept {
  if (a.log_value != b.log_value) return a.log_value > b.log_value;
  if (a.depth != b.depth) return a.depth < b.depth;
  return a.insertion_index < b.insertion_index;
}

/// Expansion-phase speculation tree. Nodes are stored layer by layer in
/// insertion order, so node i has insertion_index i.
class DraftTree {
 public:
  const std::vector<TokenId>& context() const noexcept { return context_; }
  const std::vector<DraftNode>& nodes() const noexcept { return nodes_; }
  const DraftNode& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Current depth limit (grows with extend).
  int depth() const noexcept { return depth_; }
  /// Depth the tree was first expanded to.
  int base_depth() const noexcept { return base_depth_; }
  int top_k() const noexcept { return top_k_; }
  int expand_width() const noexcept { return expand_width_; }

  /// Children of a node, or of the root when parent == kRootParent.
  std::span<const std::size_t> children(std::int32_t parent) const;
  /// Nodes of one layer (1-based depth); empty past the deepest layer.
  std::span<const DraftNode> layer(int depth) const;
  /// Tokens from the root down to and including node i.
  std::vector<TokenId> path_tokens(std::size_t i) const;
  /// Node indices from the root down to and including node i.
  std::vector<std::size_t> path_nodes(std::size_t i) const;

 private:
  friend DraftTree expand(const LanguageModel&, std::span<const TokenId>, int, int, int);
  friend DraftTree extend(DraftTree, const LanguageModel&, int, int, int);

  void add_children(const LanguageModel& draft, std::int32_t parent, int top_k);
  void grow(const LanguageModel& draft, int layers, int top_k, int expand_width);

  std::vector<TokenId> context_;
  std::vector<DraftNode> nodes_;
  std::vector<std::vector<std::size_t>> children_;  // index 0 is the root
  std::vector<std::size_t> layer_begin_;            // layer l spans [layer_begin_[l-1], layer_begin_[l])
  int depth_ = 0;
  int base_depth_ = 0;
  int top_k_ = 0;
  int expand_width_ = 0;
};

/// Builds the tree to `depth` layers. Layer 1 holds the top_k root tokens; each
/// later layer expands the expand_width highest-V nodes of the previous layer
/// into their top_k children. Zero-probability children are never created.
/// Throws ConfigError unless depth, top_k and expand_width are all >= 1.
DraftTree expand(const LanguageModel& draft, std::span<const TokenId> context, int depth, int top_k,
                 int expand_width);

/// Continues expansion for extra_layers more layers; equivalent to having
/// expanded to depth() + extra_layers in the first place. Existing nodes are untouched.
DraftTree extend(DraftTree tree, const LanguageModel& draft, int extra_layers, int top_k, int expand_width);

/// Top-N subtree chosen for verification. Nodes are listed in rank order, which
/// also lists every ancestor before its descendants.
class RerankedTree {
 public:
  RerankedTree() = default;
  RerankedTree(std::vector<std::size_t> order, std::size_t tree_size);

  std::size_t size() const noexcept { return order_.size(); }
  bool empty() const noexcept { return order_.empty(); }
  /// Node indices (into the DraftTree) in rank order.
  const std::vector<std::size_t>& nodes() const noexcept { return order_; }
  bool contains(std::size_t node) const noexcept { return node < rank_.size() && rank_[node] != 0; }
  /// 1-based rank of a selected node.
  std::optional<std::size_t> rank(std::size_t node) const noexcept;

 private:
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rank_;  // 0 = not selected
};

/// Selects the min(N, |T1|) nodes that rank first. Throws ConfigError when N < 1.
RerankedTree rerank(const DraftTree& tree, std::size_t top_n);

/// Indented text rendering (token, c, V, depth) for debugging and golden tests.
/// Nodes in `selected` are marked with '*'; symbols are printed when a vocabulary is given.
std::string dump(const DraftTree& tree, const RerankedTree* selected = nullptr, const Vocabulary* vocab = nullptr);

}  // namespace specdraft
