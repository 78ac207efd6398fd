// Command-line driver for corpus generation, model training, calibration and
// baseline/adaptive comparison runs. Every subcommand writes into --out.
//
// Exit codes:
//   0  success
//   2  usage error (bad flags)
//   3  configuration error
//   4  input/output error (missing or unwritable file)
//   5  malformed input file (model, bins, CSV)
//   6  calibration failed (too few usable samples)
//   7  speculative output diverged from the baseline (verification bug)
//   8  internal contract violation
//   9  unexpected error
//
// Failures print exactly one line to stderr:
//   error: code=<name> status=<n> reason="<text>"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "specdraft/binning.hpp"
#include "specdraft/calibration.hpp"
#include "specdraft/controller.hpp"
#include "specdraft/corpus.hpp"
#include "specdraft/errors.hpp"
#include "specdraft/experiment.hpp"
#include "specdraft/metrics.hpp"

namespace fs = std::filesystem;
using namespace specdraft;

namespace {

enum Status : int {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kParse = 5,
  kCalibration = 6,
  kMismatch = 7,
  kContract = 8,
  kUnexpected = 9,
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int fail(const char* code, int status, const std::string& reason) {
  std::string flat;
  for (char c : reason) {
    if (c == '\n' || c == '\r') {
      flat += ' ';
    } else if (c == '"' || c == '\\') {
      flat += '\\';
      flat += c;
    } else {
      flat += c;
    }
  }
  std::cerr << "error: code=" << code << " status=" << status << " reason=\"" << flat << "\"\n";
  return status;
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

ExperimentConfig resolve_config(const Options& opt) {
  ExperimentConfig c = opt.config_path.empty() ? config_from_json(nlohmann::json::object())
                                               : load_config(opt.config_path);
  if (opt.seed) c.seed = *opt.seed;
  if (opt.out) c.out = *opt.out;
  if (opt.threads) c.threads = *opt.threads;
  c.validate();
  return c;
}

fs::path out_dir(const ExperimentConfig& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  return f;
}

void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw IoError("missing '" + path.string() + "' (" + hint + ")");
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

void write_config(const fs::path& dir, const ExperimentConfig& c) { write_json(dir / "config.json", to_json(c)); }

// A planted corpus already written by gen-corpus wins over regeneration, so a
// hand-edited corpus.txt is honoured; both paths are deterministic.
Corpus corpus_for(const ExperimentConfig& c, const fs::path& dir) {
  if (c.corpus.kind == "file") {
    require_file(c.corpus.path, "corpus.path");
    return read_corpus(c.corpus.path);
  }
  if (fs::exists(dir / "corpus.txt")) return read_corpus((dir / "corpus.txt").string());
  return load_corpus(c);
}

Experiment load_experiment(const ExperimentConfig& c, const fs::path& dir) {
  require_file(dir / "target.ngram", "run train-model first");
  require_file(dir / "draft.ngram", "run train-model first");
  return attach_models(c, corpus_for(c, dir), NGramModel::load((dir / "target.ngram").string()),
                       NGramModel::load((dir / "draft.ngram").string()));
}

BinningModel load_bins_from(const fs::path& path) {
  require_file(path, "run calibrate first");
  return load_bins(path.string());
}

void write_run(const fs::path& dir, const std::string& prefix, const GenerationResult& run) {
  {
    auto f = open_out(dir / (prefix + "iterations.csv"));
    write_iterations_csv(run.records, f);
  }
  write_json(dir / (prefix + "summary.json"), to_json(run.summary));
}

int cmd_gen_corpus(const Options& opt) {
  const auto c = resolve_config(opt);
  if (c.corpus.kind != "planted") throw ConfigError("gen-corpus needs corpus.kind = planted");
  const auto dir = out_dir(c);
  const PlantedCorpus corpus = gen_corpus(c.corpus.planted, c.seed);
  write_corpus(corpus.documents, (dir / "corpus.txt").string());
  nlohmann::ordered_json meta;
  meta["schema"] = "specdraft.corpus/1";
  meta["documents"] = corpus.documents.size();
  meta["positions"] = corpus.positions;
  meta["template_positions"] = corpus.template_positions;
  meta["coverage"] = corpus.coverage();
  meta["lambda"] = c.corpus.planted.lambda;
  meta["templates"] = corpus.templates;
  meta["corpus_hash"] = corpus_hash(corpus.documents);
  write_json(dir / "corpus_meta.json", meta);
  write_config(dir, c);
  std::cout << "corpus: " << corpus.documents.size() << " documents, coverage " << corpus.coverage() << '\n';
  return kOk;
}

int cmd_train(const Options& opt) {
  const auto c = resolve_config(opt);
  const auto dir = out_dir(c);
  const Experiment exp = build_experiment(c, corpus_for(c, dir));
  exp.target->save((dir / "target.ngram").string());
  exp.draft_base->save((dir / "draft.ngram").string());
  write_config(dir, c);
  std::cout << "models: vocab " << exp.vocab().size() << ", train docs " << exp.train.size() << ", held-out docs "
            << exp.heldout.size() << '\n';
  return kOk;
}

int cmd_calibrate(const Options& opt) {
  const auto c = resolve_config(opt);
  const auto dir = out_dir(c);
  const Experiment exp = load_experiment(c, dir);
  const CalibrationOutcome cal = calibrate(exp, c);
  {
    auto f = open_out(dir / "calibration.csv");
    write_calibration_csv(cal.samples, f);
  }
  {
    auto f = open_out(dir / "calibration_iterations.csv");
    write_iterations_csv(cal.run.records, f);
  }
  save_bins(cal.bins, (dir / "bins.txt").string());
  write_config(dir, c);
  std::cout << "calibration: " << cal.samples.size() << " samples, " << cal.bins.bin_count() << " bins\n";
  return kOk;
}

int cmd_run(const Options& opt, const std::string& arm, const std::string& bins_path) {
  const auto c = resolve_config(opt);
  const auto dir = out_dir(c);
  const Experiment exp = load_experiment(c, dir);
  std::optional<BinningModel> bins;
  const fs::path bpath = bins_path.empty() ? dir / "bins.txt" : fs::path(bins_path);
  if (arm == "adaptive" || fs::exists(bpath)) bins = load_bins_from(bpath);
  const auto prompts = evaluation_prompts(exp, c);
  const GenerationResult run = run_arm(*exp.target, *exp.draft, prompts, c.hetero, bins ? &*bins : nullptr,
                                       arm == "adaptive", c.cost, c.threads);
  const auto problems = check_accounting(run.records, run.summary);
  if (!problems.empty()) throw ContractViolation("accounting: " + problems.front());
  const fs::path run_dir = dir / ("run-" + arm);
  fs::create_directories(run_dir);
  write_run(run_dir, "", run);
  std::cout << arm << ": calls " << run.summary.calls << ", tokens " << run.summary.tokens << ", tau "
            << run.summary.tau << '\n';
  return kOk;
}

int cmd_compare(const Options& opt, const std::string& bins_path) {
  const auto c = resolve_config(opt);
  const auto dir = out_dir(c);
  const Experiment exp = load_experiment(c, dir);
  const BinningModel bins = load_bins_from(bins_path.empty() ? dir / "bins.txt" : fs::path(bins_path));
  const auto prompts = evaluation_prompts(exp, c);
  const fs::path cmp = dir / "compare";
  fs::create_directories(cmp);

  ComparisonResult result;
  try {
    result = run_comparison(*exp.target, *exp.draft, prompts, c.hetero, bins, c.cost, c.threads);
  } catch (const OutputMismatch& e) {
    write_json(cmp / "identity.json", {{"schema", "specdraft.identity/1"}, {"identical", false}, {"detail", e.what()}});
    throw;
  }
  write_json(cmp / "identity.json",
             {{"schema", "specdraft.identity/1"}, {"identical", true}, {"prompts", prompts.size()}});
  for (const auto* run : {&result.baseline, &result.adaptive}) {
    const auto problems = check_accounting(run->records, run->summary);
    if (!problems.empty()) throw ContractViolation("accounting: " + problems.front());
  }
  write_run(cmp, "baseline_", result.baseline);
  write_run(cmp, "adaptive_", result.adaptive);

  const std::vector<std::pair<std::string, RunSummary>> table{{"baseline", result.baseline.summary},
                                                              {"adaptive", result.adaptive.summary}};
  {
    auto f = open_out(cmp / "table.csv");
    write_summary_table_csv(table, f);
  }
  nlohmann::ordered_json quantiles;
  quantiles["schema"] = "specdraft.tcr_quantiles/1";
  quantiles["baseline"] = to_json(tcr_quantiles(result.baseline.records));
  quantiles["adaptive"] = to_json(tcr_quantiles(result.adaptive.records));
  write_json(cmp / "tcr_quantiles.json", quantiles);

  std::vector<std::pair<std::string, RunSummary>> sweep;
  for (const auto& row : alpha_sweep(exp, c, bins)) sweep.emplace_back("alpha=" + std::to_string(row.alpha), row.summary);
  {
    auto f = open_out(cmp / "alpha_sweep.csv");
    write_summary_table_csv(sweep, f);
  }
  write_config(dir, c);
  write_summary_table_csv(table, std::cout);
  return kOk;
}

// Writes plot-ready tables next to every iteration log found in the run directory.
int cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw IoError("run directory '" + run_dir + "' does not exist");
  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() >= 14 && name.compare(name.size() - 14, 14, "iterations.csv") == 0) logs.push_back(entry.path());
  }
  if (logs.empty()) throw IoError("no iteration records in '" + run_dir + "'");
  std::sort(logs.begin(), logs.end());
  for (const auto& log : logs) {
    std::ifstream in(log, std::ios::binary);
    if (!in) throw IoError("cannot read '" + log.string() + "'");
    const auto records = read_iterations_csv(in);
    if (records.empty()) throw IoError("'" + log.string() + "' has no iteration records");
    const std::string name = log.filename().string();
    const std::string prefix = name.substr(0, name.size() - 14);
    const RunSummary summary = summarize(records);
    {
      auto f = open_out(dir / (prefix + "tcr_histogram.csv"));
      write_tcr_histogram_csv(summary, f);
    }
    {
      auto f = open_out(dir / (prefix + "tcr_buckets.csv"));
      const auto buckets = accepted_by_tcr_quartile(records);
      write_tcr_bucket_csv(buckets, f);
    }
    {
      auto f = open_out(dir / (prefix + "bin_occupancy.csv"));
      write_bin_occupancy_csv(summary, f);
    }
    std::cout << log.filename().string() << ": " << records.size() << " iterations\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specdraft: entropy-adaptive draft-tree speculative decoding lab"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "experiment config (JSON)");
    sub->add_option("--seed", opt.seed, "root seed (overrides config)");
    sub->add_option("--out", opt.out, "output directory (overrides config)");
    sub->add_option("--threads", opt.threads, "worker threads for independent prompts");
  };

  auto* gen = app.add_subcommand("gen-corpus", "generate a planted-template corpus");
  add_common(gen);
  auto* train = app.add_subcommand("train-model", "train target and draft n-gram models");
  add_common(train);
  auto* cal = app.add_subcommand("calibrate", "collect calibration samples and fit entropy bins");
  add_common(cal);
  auto* run = app.add_subcommand("run", "decode the evaluation prompts with one arm");
  add_common(run);
  std::string arm = "baseline";
  std::string bins_path;
  run->add_option("--arm", arm, "baseline or adaptive")->check(CLI::IsMember({"baseline", "adaptive"}));
  run->add_option("--bins", bins_path, "binning model (default <out>/bins.txt)");
  auto* cmp = app.add_subcommand("compare", "paired baseline/adaptive runs plus the alpha sweep");
  add_common(cmp);
  cmp->add_option("--bins", bins_path, "binning model (default <out>/bins.txt)");
  auto* rep = app.add_subcommand("report", "plot-ready tables from a run directory");
  std::string run_dir;
  rep->add_option("run_dir", run_dir, "directory holding *iterations.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", kUsage, e.what());
  }

  try {
    if (*gen) return cmd_gen_corpus(opt);
    if (*train) return cmd_train(opt);
    if (*cal) return cmd_calibrate(opt);
    if (*run) return cmd_run(opt, arm, bins_path);
    if (*cmp) return cmd_compare(opt, bins_path);
    if (*rep) return cmd_report(run_dir);
  } catch (const ConfigError& e) {
    return fail("config", kConfig, e.what());
  } catch (const IoError& e) {
    return fail("io", kIo, e.what());
  } catch (const ParseError& e) {
    return fail("parse", kParse, e.what());
  } catch (const CalibrationError& e) {
    return fail("calibration", kCalibration, e.what());
  } catch (const OutputMismatch& e) {
    return fail("output-mismatch", kMismatch, e.what());
  } catch (const ContractViolation& e) {
    return fail("contract", kContract, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("io", kIo, e.what());
  } catch (const std::exception& e) {
    return fail("unexpected", kUnexpected, e.what());
  }
  return kUsage;
}
