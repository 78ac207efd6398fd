#include "specdraft/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "specdraft/errors.hpp"

namespace specdraft {

double topk_step_entropy(const ProbDist& dist, std::size_t k) {
  if (k < 1) throw ConfigError("Top-K entropy needs K >= 1");
  k = std::min(k, dist.size());
  if (k == 1) return 0.0;
  std::vector<double> top(dist.probs().begin(), dist.probs().end());
  // Only the values matter here, so tie order among equal probabilities is irrelevant.
  std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(k), top.end(), std::greater<>());
  top.resize(k);
  double mass = 0.0;
  for (double p : top) mass += p;
  double h = 0.0;
  for (double p : top) {
    if (p <= 0.0) continue;
    const double q = p / mass;
    h -= q * std::log(q);
  }
  return std::max(0.0, h);
}

MetaPath select_meta_path(const DraftTree& tree) {
  if (tree.size() == 0) throw ContractViolation("select_meta_path: empty draft tree");
  MetaPath path;
  int depth = std::min(tree.base_depth(), tree.depth());
  while (depth > 1 && tree.layer(depth).empty()) --depth;
  path.truncated = depth != tree.base_depth();

  const DraftNode* best = nullptr;
  double best_conf = 0.0;
  for (const auto& n : tree.layer(depth)) {
    const double conf = n.step_dist->probs()[n.step_dist->argmax()];
    const bool better = best == nullptr || conf > best_conf ||
                        (conf == best_conf && (n.log_value > best->log_value ||
                                               (n.log_value == best->log_value && n.insertion_index < best->insertion_index)));
    if (better) {
      best = &n;
      best_conf = conf;
    }
  }
  path.final_confidence = best_conf;
  path.nodes = tree.path_nodes(best->insertion_index);
  for (std::size_t i : path.nodes) path.step_dists.push_back(tree.node(i).step_dist.get());
  return path;
}

PathEntropy cumulative_path_entropy(const MetaPath& path, std::size_t k) {
  if (path.step_dists.empty()) throw ContractViolation("cumulative_path_entropy: empty path");
  PathEntropy h;
  for (const ProbDist* d : path.step_dists) h.nats += topk_step_entropy(*d, k);
  return h;
}

}  // namespace specdraft
