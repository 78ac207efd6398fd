#include "specdraft/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "specdraft/errors.hpp"

namespace specdraft {

using nlohmann::json;
using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  if (version != kConfigVersion) throw ConfigError("unsupported config version " + std::to_string(version));
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (corpus.kind != "planted" && corpus.kind != "file") {
    throw ConfigError("corpus.kind must be 'planted' or 'file'");
  }
  if (corpus.kind == "file" && corpus.path.empty()) throw ConfigError("corpus.path is required for file corpora");
  if (corpus.kind == "planted") corpus.planted.validate();
  if (!(corpus.heldout_fraction > 0.0 && corpus.heldout_fraction < 1.0)) {
    throw ConfigError("corpus.heldout_fraction must be in (0, 1)");
  }
  if (models.order < 1 || models.draft_order < 1) throw ConfigError("model orders must be >= 1");
  if (!(models.smoothing > 0.0)) throw ConfigError("models.smoothing must be > 0");
  if (!(models.draft_fraction > 0.0 && models.draft_fraction <= 1.0)) {
    throw ConfigError("models.draft_fraction must be in (0, 1]");
  }
  if (!(models.draft_temperature > 0.0)) throw ConfigError("models.draft_temperature must be > 0");
  if (!(models.draft_epsilon >= 0.0 && models.draft_epsilon <= 1.0)) {
    throw ConfigError("models.draft_epsilon must be in [0, 1]");
  }
  hetero.validate();
  if (calibration.tree_depth < 1 || calibration.tree_depth > 3) {
    throw ConfigError("calibration.tree_depth must be in [1, 3]");
  }
  if (evaluation.prompt_length == 0) throw ConfigError("evaluation.prompt_length must be >= 1");
  if (cost.call < 0 || cost.token < 0 || cost.draft_layer < 0) throw ConfigError("cost terms must be >= 0");
}

namespace {

// Reads the keys of one JSON object, rejecting any key not listed.
class Section {
 public:
  Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  template <class T>
  Section& get(const char* key, T& dst) {
    known_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return *this;
    try {
      dst = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for '" + name_ + "." + key + "'");
    }
    return *this;
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json* child(const char* key) {
    known_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!known_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& obj_;
  std::string name_;
  std::set<std::string> known_;
};

template <class Parse>
void get_enum(Section& s, const char* key, Parse parse) {
  std::string text;
  s.get(key, text);
  if (!text.empty()) parse(text);
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Section top(j, "config");
  top.get("version", c.version).get("seed", c.seed).get("out", c.out).get("threads", c.threads);
  if (c.version != kConfigVersion) throw ConfigError("unsupported config version " + std::to_string(c.version));

  if (const json* sub = top.child("corpus")) {
    Section s(*sub, "corpus");
    s.get("kind", c.corpus.kind).get("path", c.corpus.path).get("heldout_fraction", c.corpus.heldout_fraction);
    get_enum(s, "mode", [&](const std::string& t) { c.corpus.mode = parse_tokenization_mode(t); });
    if (const json* p = s.child("planted")) {
      Section ps(*p, "corpus.planted");
      auto& sp = c.corpus.planted;
      ps.get("templates", sp.templates)
          .get("template_length", sp.template_length)
          .get("lambda", sp.lambda)
          .get("rho", sp.rho)
          .get("alphabet", sp.alphabet)
          .get("documents", sp.documents)
          .get("document_length", sp.document_length);
      ps.finish();
    }
    s.finish();
  }
  if (const json* sub = top.child("models")) {
    Section s(*sub, "models");
    auto& m = c.models;
    s.get("order", m.order)
        .get("smoothing", m.smoothing)
        .get("draft_fraction", m.draft_fraction)
        .get("draft_order", m.draft_order)
        .get("draft_temperature", m.draft_temperature)
        .get("draft_epsilon", m.draft_epsilon);
    s.finish();
  }
  if (const json* sub = top.child("hetero")) {
    Section s(*sub, "hetero");
    auto& h = c.hetero;
    s.get("depth", h.depth)
        .get("top_k", h.top_k)
        .get("top_n", h.top_n)
        .get("expand_width", h.expand_width)
        .get("gamma", h.gamma)
        .get("low_bins", h.low_bins)
        .get("entropy_k", h.entropy_k)
        .get("max_new_tokens", h.max_new_tokens);
    h.alpha = default_alpha(h.depth);
    s.get("alpha", h.alpha);
    s.finish();
  }
  if (const json* sub = top.child("calibration")) {
    Section s(*sub, "calibration");
    auto& cal = c.calibration;
    s.get("prompts", cal.prompts).get("tree_depth", cal.tree_depth);
    get_enum(s, "filter", [&](const std::string& t) { cal.filter = parse_calibration_filter(t); });
    get_enum(s, "label", [&](const std::string& t) { cal.label = parse_calibration_label(t); });
    get_enum(s, "criterion", [&](const std::string& t) { cal.criterion = parse_split_criterion(t); });
    s.finish();
  }
  if (const json* sub = top.child("evaluation")) {
    Section s(*sub, "evaluation");
    s.get("prompts", c.evaluation.prompts).get("prompt_length", c.evaluation.prompt_length);
    s.finish();
  }
  if (const json* sub = top.child("cost")) {
    Section s(*sub, "cost");
    s.get("call", c.cost.call).get("token", c.cost.token).get("draft_layer", c.cost.draft_layer);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ordered_json to_json(const ExperimentConfig& c) {
  const auto& sp = c.corpus.planted;
  const auto& h = c.hetero;
  ordered_json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["threads"] = c.threads;
  j["corpus"] = {{"kind", c.corpus.kind},
                 {"path", c.corpus.path},
                 {"mode", std::string(to_string(c.corpus.mode))},
                 {"heldout_fraction", c.corpus.heldout_fraction},
                 {"planted",
                  {{"templates", sp.templates},
                   {"template_length", sp.template_length},
                   {"lambda", sp.lambda},
                   {"rho", sp.rho},
                   {"alphabet", sp.alphabet},
                   {"documents", sp.documents},
                   {"document_length", sp.document_length}}}};
  j["models"] = {{"order", c.models.order},
                 {"smoothing", c.models.smoothing},
                 {"draft_fraction", c.models.draft_fraction},
                 {"draft_order", c.models.draft_order},
                 {"draft_temperature", c.models.draft_temperature},
                 {"draft_epsilon", c.models.draft_epsilon}};
  j["hetero"] = {{"depth", h.depth},
                 {"top_k", h.top_k},
                 {"top_n", h.top_n},
                 {"expand_width", h.expand_width},
                 {"alpha", h.alpha},
                 {"gamma", h.gamma},
                 {"low_bins", h.low_bins},
                 {"entropy_k", h.entropy_k},
                 {"max_new_tokens", h.max_new_tokens}};
  j["calibration"] = {{"prompts", c.calibration.prompts},
                      {"filter", to_string(c.calibration.filter)},
                      {"label", to_string(c.calibration.label)},
                      {"criterion", to_string(c.calibration.criterion)},
                      {"tree_depth", c.calibration.tree_depth}};
  j["evaluation"] = {{"prompts", c.evaluation.prompts}, {"prompt_length", c.evaluation.prompt_length}};
  j["cost"] = {{"call", c.cost.call}, {"token", c.cost.token}, {"draft_layer", c.cost.draft_layer}};
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

Corpus load_corpus(const ExperimentConfig& config) {
  if (config.corpus.kind == "file") return read_corpus(config.corpus.path);
  return gen_corpus(config.corpus.planted, config.seed).documents;
}

namespace {

std::size_t heldout_start(std::size_t documents, double fraction) {
  const auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(documents)));
  if (documents < 2 || held == 0 || held >= documents) {
    throw ConfigError("corpus needs at least one training and one held-out document");
  }
  return documents - held;
}

Experiment assemble(const ExperimentConfig& config, const Corpus& corpus, std::shared_ptr<const NGramModel> target,
                    std::shared_ptr<const NGramModel> draft_base) {
  if (!(target->vocabulary() == draft_base->vocabulary())) {
    throw ConfigError("target and draft models were trained with different vocabularies");
  }
  Experiment exp;
  const std::size_t split = heldout_start(corpus.size(), config.corpus.heldout_fraction);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto tokens = target->vocabulary().encode(corpus[i]);
    (i < split ? exp.train : exp.heldout).push_back(std::move(tokens));
  }
  exp.target = std::move(target);
  exp.draft_base = std::move(draft_base);
  exp.draft = std::make_shared<PerturbedDraftModel>(exp.draft_base, config.models.draft_temperature,
                                                    config.models.draft_epsilon);
  exp.corpus_hash = corpus_hash(corpus);
  return exp;
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& config, const Corpus& corpus) {
  config.validate();
  if (corpus.empty()) throw ConfigError("corpus is empty");
  const Vocabulary vocab = build_vocab(corpus, config.corpus.mode);
  const std::size_t split = heldout_start(corpus.size(), config.corpus.heldout_fraction);
  std::vector<std::vector<TokenId>> train;
  for (std::size_t i = 0; i < split; ++i) train.push_back(vocab.encode(corpus[i]));
  const auto draft_docs = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(config.models.draft_fraction * static_cast<double>(train.size()))));
  const std::vector<std::vector<TokenId>> draft_train(train.begin(), train.begin() + draft_docs);

  auto target = std::make_shared<const NGramModel>(
      NGramModel::train(vocab, train, config.models.order, config.models.smoothing));
  auto draft = std::make_shared<const NGramModel>(
      NGramModel::train(vocab, draft_train, config.models.draft_order, config.models.smoothing));
  return assemble(config, corpus, std::move(target), std::move(draft));
}

Experiment attach_models(const ExperimentConfig& config, const Corpus& corpus, NGramModel target,
                         NGramModel draft_base) {
  config.validate();
  return assemble(config, corpus, std::make_shared<const NGramModel>(std::move(target)),
                  std::make_shared<const NGramModel>(std::move(draft_base)));
}

std::vector<std::vector<TokenId>> make_prompts(const std::vector<std::vector<TokenId>>& documents,
                                               std::size_t count, std::size_t length) {
  std::vector<std::vector<TokenId>> prompts;
  for (const auto& doc : documents) {
    if (prompts.size() == count) break;
    if (doc.size() <= length) continue;
    prompts.emplace_back(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(length));
  }
  return prompts;
}

CalibrationOutcome calibrate(const Experiment& exp, const ExperimentConfig& config) {
  const auto prompts = make_prompts(exp.train, config.calibration.prompts, config.evaluation.prompt_length);
  if (prompts.empty()) throw ConfigError("calibration prompt set is empty");
  GenerationResult run =
      run_arm(*exp.target, *exp.draft, prompts, config.hetero, nullptr, false, config.cost, config.threads);
  auto samples = collect_calibration(run.records, config.hetero.depth, config.calibration.filter,
                                     config.calibration.label);
  std::set<double> distinct;
  for (const auto& s : samples) distinct.insert(s.x);
  if (distinct.size() < 8) {
    throw CalibrationError("too few distinct entropies: samples=" + std::to_string(samples.size()) +
                           " distinct=" + std::to_string(distinct.size()) + " required=8");
  }
  BinningModel bins = train_cart(samples, config.calibration.tree_depth, config.calibration.criterion);
  auto& meta = bins.metadata();
  meta.entropy_k = config.hetero.entropy_k;
  meta.base_depth = config.hetero.depth;
  meta.filter = to_string(config.calibration.filter);
  meta.label = to_string(config.calibration.label);
  meta.corpus_hash = exp.corpus_hash;
  return {std::move(run), std::move(samples), std::move(bins)};
}

std::vector<std::vector<TokenId>> evaluation_prompts(const Experiment& exp, const ExperimentConfig& config) {
  auto prompts = make_prompts(exp.heldout, config.evaluation.prompts, config.evaluation.prompt_length);
  if (prompts.empty()) throw ConfigError("evaluation prompt set is empty");
  return prompts;
}

std::vector<SweepRow> alpha_sweep(const Experiment& exp, const ExperimentConfig& config, const BinningModel& bins) {
  const auto prompts = evaluation_prompts(exp, config);
  std::vector<SweepRow> rows;
  const int center = default_alpha(config.hetero.depth);
  for (int alpha = std::max(0, center - 1); alpha <= center + 1; ++alpha) {
    HeteroConfig h = config.hetero;
    h.alpha = alpha;
    auto run = run_arm(*exp.target, *exp.draft, prompts, h, &bins, true, config.cost, config.threads);
    rows.push_back({alpha, run.summary});
  }
  return rows;
}

}  // namespace specdraft
