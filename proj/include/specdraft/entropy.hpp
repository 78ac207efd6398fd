#pragma once

#include <cstddef>
#include <vector>

#include "specdraft/draft_tree.hpp"

namespace specdraft {

/// Cumulative Top-K path entropy, in nats.
struct PathEntropy {
  double nats = 0.0;
};

/// Entropy (nats) of the K largest probabilities renormalized to sum to 1.
/// Ties at the K-th place go to the smaller id; K larger than the vocabulary
/// clamps; 0 ln 0 is taken as 0. Throws ConfigError when K < 1.
double topk_step_entropy(const ProbDist& dist, std::size_t k);

/// Root-to-leaf path used as the tree's predictability probe.
struct MetaPath {
  std::vector<std::size_t> nodes;                 ///< node indices, root side first
  std::vector<const ProbDist*> step_dists;        ///< distribution each node was drawn from
  double final_confidence = 0.0;                  ///< Top-1 probability of the leaf's step distribution
  /// True when no node reached the base depth and the deepest layer was used instead.
  bool truncated = false;
};

/// Among nodes at the tree's base depth, picks the leaf whose step distribution
/// has the largest Top-1 probability; ties go to larger V, then earlier insertion.
/// Falls back to the deepest populated layer when the base layer is empty.
/// Throws ContractViolation on an empty tree.
MetaPath select_meta_path(const DraftTree& tree);

/// Sum of topk_step_entropy over the path's step distributions.
PathEntropy cumulative_path_entropy(const MetaPath& path, std::size_t k);

}  // namespace specdraft
