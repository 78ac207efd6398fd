#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "specdraft/vocabulary.hpp"

namespace specdraft {

/// Parameters of a synthetic character corpus in which a fraction of positions
/// copies one of a few fixed templates (with per-token noise) and the rest is
/// uniform random text.
struct PlantedCorpusSpec {
  std::size_t templates = 8;
  std::size_t template_length = 24;
  double lambda = 0.7;       ///< target fraction of template-generated positions
  double rho = 0.97;         ///< probability a template position keeps its template symbol
  std::size_t alphabet = 26; ///< symbols 'a', 'b', ... (at most 26)
  std::size_t documents = 400;
  std::size_t document_length = 400;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct PlantedCorpus {
  Corpus documents;
  std::vector<std::string> templates;
  std::size_t positions = 0;
  std::size_t template_positions = 0;

  double coverage() const noexcept {
    return positions == 0 ? 0.0 : static_cast<double>(template_positions) / static_cast<double>(positions);
  }
};

/// Deterministic in (spec, seed). Segment choice tracks lambda by error
/// diffusion, so coverage stays close to lambda even for short corpora.
PlantedCorpus gen_corpus(const PlantedCorpusSpec& spec, std::uint64_t seed);

/// FNV-1a over all documents, newline separated; recorded in model metadata.
std::string corpus_hash(const Corpus& corpus);

}  // namespace specdraft
