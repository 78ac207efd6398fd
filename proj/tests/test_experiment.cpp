#include <cmath>
#include <set>

#include "doctest.h"
#include "specdraft/calibration.hpp"
#include "specdraft/errors.hpp"
#include "specdraft/experiment.hpp"

using namespace specdraft;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.corpus.planted.documents = 80;
  c.corpus.planted.document_length = 240;
  c.calibration.prompts = 30;
  c.evaluation.prompts = 8;
  c.hetero.max_new_tokens = 80;
  return c;
}

}  // namespace

TEST_CASE("planted corpus coverage tracks lambda") {
  PlantedCorpusSpec spec;
  spec.documents = 25;
  spec.document_length = 400;
  for (double lambda : {0.0, 0.3, 0.6, 1.0}) {
    spec.lambda = lambda;
    const auto c = gen_corpus(spec, 11);
    CHECK(c.positions == 10000);
    CHECK(std::fabs(c.coverage() - lambda) <= 0.02);
    CHECK(c.templates.size() == spec.templates);
    for (const auto& d : c.documents) CHECK(d.size() == spec.document_length);
  }
  spec.lambda = 0.6;
  CHECK(gen_corpus(spec, 3).documents == gen_corpus(spec, 3).documents);
  CHECK(gen_corpus(spec, 3).documents != gen_corpus(spec, 4).documents);
  spec.alphabet = 40;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("corpus hash is stable and content sensitive") {
  const Corpus a{"abc", "de"};
  const Corpus b{"abc", "df"};
  CHECK(corpus_hash(a) == corpus_hash(a));
  CHECK(corpus_hash(a) != corpus_hash(b));
  CHECK(corpus_hash(a).size() == 16);
}

TEST_CASE("config JSON round-trips and rejects bad input") {
  auto c = small_config();
  c.seed = 42;
  c.hetero.gamma = {0.25, 0.5, 0.75};
  c.calibration.filter = CalibrationFilter::kAnyAccepted;
  const auto j = nlohmann::json::parse(to_json(c).dump());
  const auto back = config_from_json(j);
  CHECK(to_json(back).dump() == to_json(c).dump());

  auto bad = j;
  bad["hetero"]["depthh"] = 3;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = j;
  bad["version"] = 2;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = j;
  bad["hetero"]["depth"] = "five";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = j;
  bad["calibration"]["filter"] = "some";
  CHECK_THROWS(config_from_json(bad));

  const auto partial = config_from_json(nlohmann::json::parse(R"({"hetero": {"depth": 7}})"));
  CHECK(partial.hetero.depth == 7);
  CHECK(partial.hetero.alpha == 4);
  CHECK(partial.hetero.top_n == 20);
}

TEST_CASE("experiment pipeline is deterministic and exact") {
  const auto config = small_config();
  const auto corpus = load_corpus(config);
  const auto exp = build_experiment(config, corpus);
  CHECK(exp.train.size() + exp.heldout.size() == corpus.size());
  CHECK(exp.heldout.size() == 16);
  const auto outcome = calibrate(exp, config);
  CHECK(outcome.bins.bin_count() >= 2);
  CHECK(outcome.bins.bin_count() <= 8);
  CHECK(outcome.bins.metadata().corpus_hash == exp.corpus_hash);
  CHECK(outcome.bins.metadata().base_depth == config.hetero.depth);

  const auto prompts = evaluation_prompts(exp, config);
  CHECK(prompts.size() == 8);
  const auto cmp = run_comparison(*exp.target, *exp.draft, prompts, config.hetero, outcome.bins);
  CHECK(cmp.baseline.tokens == cmp.adaptive.tokens);

  const auto again = build_experiment(config, load_corpus(config));
  CHECK(*again.target == *exp.target);
  const auto outcome2 = calibrate(again, config);
  CHECK(outcome2.bins.thresholds() == outcome.bins.thresholds());

  const auto sweep = alpha_sweep(exp, config, outcome.bins);
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].alpha == 2);
  CHECK(sweep[2].alpha == 4);
}

TEST_CASE("both calibration filters give usable bins") {
  auto config = small_config();
  const auto exp = build_experiment(config, load_corpus(config));
  for (auto f : {CalibrationFilter::kFullyAccepted, CalibrationFilter::kAnyAccepted, CalibrationFilter::kAll}) {
    config.calibration.filter = f;
    const auto outcome = calibrate(exp, config);
    CHECK(outcome.bins.metadata().filter == to_string(f));
    const auto t = outcome.bins.thresholds();
    CHECK(std::is_sorted(t.begin(), t.end()));
  }
  CHECK(parse_calibration_filter("any-accepted") == CalibrationFilter::kAnyAccepted);
  CHECK(parse_calibration_label("meta-path-rank") == CalibrationLabel::kMetaPathRank);
}

TEST_CASE("calibration sample collection") {
  IterationRecord full;
  full.accepted_len = 5;
  full.tcr = 7;
  full.entropy = 0.4;
  full.meta_path_rank = 9;
  IterationRecord partial = full;
  partial.accepted_len = 2;
  partial.entropy = 1.1;
  IterationRecord none = full;
  none.accepted_len = 0;
  none.tcr = 21;
  const std::vector<IterationRecord> rs{full, partial, none};
  CHECK(collect_calibration(rs, 5).size() == 1);
  CHECK(collect_calibration(rs, 5, CalibrationFilter::kAnyAccepted).size() == 2);
  CHECK(collect_calibration(rs, 5, CalibrationFilter::kAll).size() == 3);
  const auto labelled = collect_calibration(rs, 5, CalibrationFilter::kFullyAccepted, CalibrationLabel::kMetaPathRank);
  CHECK(labelled[0].y == 9.0);
  CHECK(labelled[0].x == 0.4);
  CHECK_THROWS_AS(collect_calibration(std::vector<IterationRecord>{partial}, 5), CalibrationError);
}

TEST_CASE("calibration rejects unusable inputs") {
  auto config = small_config();
  const auto exp = build_experiment(config, load_corpus(config));
  auto none = config;
  none.calibration.prompts = 0;
  CHECK_THROWS_AS(calibrate(exp, none), ConfigError);

  // A single short prompt cannot yield eight distinct entropies.
  auto tiny = config;
  tiny.calibration.prompts = 1;
  tiny.hetero.max_new_tokens = 6;
  CHECK_THROWS_AS(calibrate(exp, tiny), CalibrationError);

  auto long_prompts = config;
  long_prompts.evaluation.prompt_length = 10000;
  CHECK_THROWS_AS(evaluation_prompts(exp, long_prompts), ConfigError);
}
