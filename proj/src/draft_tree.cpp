#include "specdraft/draft_tree.hpp"

#include <algorithm>
#include <cstdio>

#include "specdraft/errors.hpp"

namespace specdraft {

std::span<const std::size_t> DraftTree::children(std::int32_t parent) const {
  return children_.at(static_cast<std::size_t>(parent + 1));
}

std::span<const DraftNode> DraftTree::layer(int depth) const {
  if (depth < 1 || depth > static_cast<int>(layer_begin_.size()) - 1) return {};
  const auto l = static_cast<std::size_t>(depth);
  return std::span<const DraftNode>(nodes_).subspan(layer_begin_[l - 1], layer_begin_[l] - layer_begin_[l - 1]);
}

std::vector<std::size_t> DraftTree::path_nodes(std::size_t i) const {
  std::vector<std::size_t> path;
  for (auto cur = static_cast<std::int32_t>(i); cur != kRootParent; cur = nodes_.at(static_cast<std::size_t>(cur)).parent) {
    path.push_back(static_cast<std::size_t>(cur));
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<TokenId> DraftTree::path_tokens(std::size_t i) const {
  std::vector<TokenId> tokens;
  for (std::size_t n : path_nodes(i)) tokens.push_back(nodes_[n].token);
  return tokens;
}

void DraftTree::add_children(const LanguageModel& draft, std::int32_t parent, int top_k) {
  std::vector<TokenId> ctx = context_;
  double parent_log_value = 0.0;
  int parent_depth = 0;
  if (parent != kRootParent) {
    const auto tail = path_tokens(static_cast<std::size_t>(parent));
    ctx.insert(ctx.end(), tail.begin(), tail.end());
    parent_log_value = nodes_[static_cast<std::size_t>(parent)].log_value;
    parent_depth = nodes_[static_cast<std::size_t>(parent)].depth;
  }
  auto dist = std::make_shared<const ProbDist>(draft.next_dist(ctx));
  for (TokenId tok : dist->top_k(static_cast<std::size_t>(top_k))) {
    DraftNode node;
    node.token = tok;
    node.confidence = (*dist)[tok];
    node.log_value = parent_log_value + std::log(node.confidence);
    node.depth = parent_depth + 1;
    node.parent = parent;
    node.insertion_index = nodes_.size();
    node.step_dist = dist;
    children_[static_cast<std::size_t>(parent + 1)].push_back(nodes_.size());
    nodes_.push_back(std::move(node));
    children_.emplace_back();
  }
}

void DraftTree::grow(const LanguageModel& draft, int layers, int top_k, int expand_width) {
  for (int step = 0; step < layers; ++step) {
    if (depth_ == 0) {
      add_children(draft, kRootParent, top_k);
    } else {
      const auto prev = layer(depth_);
      std::vector<std::size_t> frontier;
      frontier.reserve(prev.size());
      for (const auto& n : prev) frontier.push_back(n.insertion_index);
      const auto width = std::min<std::size_t>(static_cast<std::size_t>(expand_width), frontier.size());
      std::partial_sort(frontier.begin(), frontier.begin() + static_cast<std::ptrdiff_t>(width), frontier.end(),
                        [this](std::size_t a, std::size_t b) { return ranks_before(nodes_[a], nodes_[b]); });
      frontier.resize(width);
      for (std::size_t n : frontier) add_children(draft, static_cast<std::int32_t>(n), top_k);
    }
    ++depth_;
    layer_begin_.push_back(nodes_.size());
  }
}

DraftTree expand(const LanguageModel& draft, std::span<const TokenId> context, int depth, int top_k,
                 int expand_width) {
  if (depth < 1 || top_k < 1 || expand_width < 1) {
    throw ConfigError("expand: depth, top_k and expand_width must all be >= 1");
  }
  DraftTree tree;
  tree.context_.assign(context.begin(), context.end());
  tree.children_.emplace_back();
  tree.layer_begin_.push_back(0);
  tree.top_k_ = top_k;
  tree.expand_width_ = expand_width;
  tree.grow(draft, depth, top_k, expand_width);
  tree.base_depth_ = depth;
  return tree;
}

DraftTree extend(DraftTree tree, const LanguageModel& draft, int extra_layers, int top_k, int expand_width) {
  if (extra_layers < 1) throw ConfigError("extend: extra_layers must be >= 1");
  if (top_k < 1 || expand_width < 1) throw ConfigError("extend: top_k and expand_width must be >= 1");
  tree.grow(draft, extra_layers, top_k, expand_width);
  return tree;
}

RerankedTree::RerankedTree(std::vector<std::size_t> order, std::size_t tree_size)
    : order_(std::move(order)), rank_(tree_size, 0) {
  for (std::size_t i = 0; i < order_.size(); ++i) rank_.at(order_[i]) = i + 1;
}

std::optional<std::size_t> RerankedTree::rank(std::size_t node) const noexcept {
  if (!contains(node)) return std::nullopt;
  return rank_[node];
}

RerankedTree rerank(const DraftTree& tree, std::size_t top_n) {
  if (top_n < 1) throw ConfigError("rerank: N must be >= 1");
  const auto& nodes = tree.nodes();
  std::vector<std::size_t> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto n = std::min(top_n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) { return ranks_before(nodes[a], nodes[b]); });
  order.resize(n);
  return RerankedTree(std::move(order), nodes.size());
}

namespace {

void dump_subtree(const DraftTree& tree, std::int32_t parent, const RerankedTree* selected,
                  const Vocabulary* vocab, std::string& out) {
  for (std::size_t i : tree.children(parent)) {
    const auto& n = tree.node(i);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%*s%s#%zu tok=%u", 2 * (n.depth - 1), "",
                  selected != nullptr && selected->contains(i) ? "*" : "", i, n.token);
    out += buf;
    if (vocab != nullptr) out += " '" + vocab->symbol(n.token) + "'";
    std::snprintf(buf, sizeof buf, " c=%.6f V=%.6f d=%d\n", n.confidence, n.value(), n.depth);
    out += buf;
    dump_subtree(tree, static_cast<std::int32_t>(i), selected, vocab, out);
  }
}

}  // namespace

std::string dump(const DraftTree& tree, const RerankedTree* selected, const Vocabulary* vocab) {
  char head[128];
  std::snprintf(head, sizeof head, "tree depth=%d base_depth=%d top_k=%d expand_width=%d nodes=%zu\n", tree.depth(),
                tree.base_depth(), tree.top_k(), tree.expand_width(), tree.size());
  std::string out = head;
  dump_subtree(tree, kRootParent, selected, vocab, out);
  return out;
}

}  // namespace specdraft
