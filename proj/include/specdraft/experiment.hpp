#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "specdraft/binning.hpp"
#include "specdraft/calibration.hpp"
#include "specdraft/controller.hpp"
#include "specdraft/corpus.hpp"
#include "specdraft/language_model.hpp"
#include "specdraft/metrics.hpp"

namespace specdraft {

inline constexpr int kConfigVersion = 1;

struct CorpusSource {
  std::string kind = "planted";  ///< "planted" or "file"
  std::string path;              ///< corpus file when kind == "file"
  TokenizationMode mode = TokenizationMode::kCharacter;
  double heldout_fraction = 0.2; ///< trailing documents reserved for evaluation prompts
  PlantedCorpusSpec planted;
};

struct ModelSpec {
  int order = 4;
  double smoothing = 0.1;
  /// The draft's base n-gram sees only this leading fraction of the training documents.
  double draft_fraction = 0.5;
  int draft_order = 4;
  double draft_temperature = 1.0;
  double draft_epsilon = 0.02;
};

struct CalibrationSpec {
  std::size_t prompts = 60;
  CalibrationFilter filter = CalibrationFilter::kFullyAccepted;
  CalibrationLabel label = CalibrationLabel::kTcr;
  SplitCriterion criterion = SplitCriterion::kNormalizedVariance;
  int tree_depth = 3;
};

struct EvaluationSpec {
  std::size_t prompts = 40;
  std::size_t prompt_length = 16;
};

/// Everything one experiment needs; serialized as a versioned JSON document.
struct ExperimentConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 1;
  std::string out = "out";
  unsigned threads = 1;
  CorpusSource corpus;
  ModelSpec models;
  HeteroConfig hetero;
  CalibrationSpec calibration;
  EvaluationSpec evaluation;
  CostModel cost;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys and a wrong version are errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// Planted generation or file ingestion, per config.corpus.
Corpus load_corpus(const ExperimentConfig& config);

/// Trained models plus the encoded document splits they were trained on.
struct Experiment {
  std::shared_ptr<const NGramModel> target;
  std::shared_ptr<const NGramModel> draft_base;
  std::shared_ptr<const PerturbedDraftModel> draft;
  std::vector<std::vector<TokenId>> train;
  std::vector<std::vector<TokenId>> heldout;
  std::string corpus_hash;

  const Vocabulary& vocab() const { return target->vocabulary(); }
};

/// Splits the corpus and trains target and draft models.
Experiment build_experiment(const ExperimentConfig& config, const Corpus& corpus);
/// Rebuilds an experiment around models trained earlier (train-model output).
Experiment attach_models(const ExperimentConfig& config, const Corpus& corpus, NGramModel target,
                         NGramModel draft_base);

/// First `length` tokens of up to `count` documents long enough to have a continuation.
std::vector<std::vector<TokenId>> make_prompts(const std::vector<std::vector<TokenId>>& documents,
                                               std::size_t count, std::size_t length);

struct CalibrationOutcome {
  GenerationResult run;  ///< baseline decoding over the calibration prompts
  std::vector<CalibrationSample> samples;
  BinningModel bins;
};

/// Baseline decoding over prompts from the training split, then CART binning.
/// Throws ConfigError on an empty prompt set and CalibrationError when fewer than
/// eight distinct entropies survive the filter.
CalibrationOutcome calibrate(const Experiment& exp, const ExperimentConfig& config);

std::vector<std::vector<TokenId>> evaluation_prompts(const Experiment& exp, const ExperimentConfig& config);

struct SweepRow {
  int alpha = 0;
  RunSummary summary;
};

/// Adaptive runs at alpha = ceil(d/2) - 1, ceil(d/2), ceil(d/2) + 1 (clamped at 0).
std::vector<SweepRow> alpha_sweep(const Experiment& exp, const ExperimentConfig& config, const BinningModel& bins);

}  // namespace specdraft
