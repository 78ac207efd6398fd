#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "specdraft/draft_tree.hpp"
#include "specdraft/verifier.hpp"

namespace specdraft {

/// Everything measured about one draft-verify cycle.
struct IterationRecord {
  std::size_t index = 0;
  std::size_t prompt = 0;
  double entropy = 0.0;              ///< cumulative meta-path Top-K entropy, nats
  int bin = -1;                      ///< -1 when no binning model was supplied
  bool meta_path_truncated = false;
  int depth_used = 0;                ///< d' (base depth plus any extension)
  std::size_t budget = 0;            ///< rerank budget n
  std::size_t tree_size = 0;         ///< |T1|
  std::size_t accepted_len = 0;
  std::size_t tcr = 0;               ///< in [1, |T2| + 1]
  std::size_t tokens_verified = 0;   ///< |T2|
  std::size_t meta_path_rank = 0;    ///< rank of the meta-path leaf in T2, |T2| + 1 if pruned

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

/// Abstract per-iteration cost: one call, per verified token, per drafted layer.
struct CostModel {
  double call = 1.0;
  double token = 0.0;
  double draft_layer = 0.0;
};

struct BinStats {
  std::size_t iterations = 0;
  double mean_accepted = 0.0;
};

struct RunSummary {
  std::uint64_t emitted = 0;
  std::uint64_t calls = 0;
  std::uint64_t tokens = 0;
  double tau = 0.0;
  /// TCR counts over iterations that accepted at least one token.
  std::map<std::size_t, std::size_t> tcr_histogram;
  /// Iterations that accepted nothing (the sentinel bucket).
  std::size_t no_accept_iterations = 0;
  std::map<int, BinStats> per_bin;
  int max_depth_used = 0;
  CostModel cost;
  double estimated_speedup = 0.0;
};

/// 1-based rank of the deepest accepted node within T2, or |T2| + 1 when nothing was accepted.
std::size_t tcr(const AcceptResult& result, const RerankedTree& selected);

/// Aggregates records. speedup = emitted * (call + token) / sum(call + token * tokens_i + draft_layer * d'_i).
/// Throws ConfigError on an empty record list, negative costs, or a zero denominator.
RunSummary summarize(std::span<const IterationRecord> records, const CostModel& cost = {});

/// Nearest-rank quantile of an ascending sample: element ceil(q * n) (1-based).
std::size_t nearest_rank(std::span<const std::size_t> sorted, double q);

struct TcrQuantiles {
  std::size_t p25 = 0;
  std::size_t p50 = 0;
  std::size_t p75 = 0;
  std::size_t p95 = 0;
  std::size_t accepting = 0;
  std::size_t sentinel = 0;
};

/// Quantiles of TCR over accepting iterations. Throws ConfigError when none accepted.
TcrQuantiles tcr_quantiles(std::span<const IterationRecord> records);

/// Mean accepted length for TCR falling in each quarter of the rerank budget.
struct TcrBucket {
  int quartile = 0;  ///< 1..4
  std::size_t iterations = 0;
  double mean_accepted = 0.0;
};
std::vector<TcrBucket> accepted_by_tcr_quartile(std::span<const IterationRecord> records);

/// Accounting identities every run must satisfy; returns human-readable violations.
std::vector<std::string> check_accounting(std::span<const IterationRecord> records, const RunSummary& summary);

inline constexpr std::string_view kIterationsSchema = "#schema=specdraft.iterations/1";

void write_iterations_csv(std::span<const IterationRecord> records, std::ostream& out);
/// Throws ParseError on a wrong schema line, header or malformed row.
std::vector<IterationRecord> read_iterations_csv(std::istream& in);

nlohmann::ordered_json to_json(const RunSummary& summary);
nlohmann::ordered_json to_json(const TcrQuantiles& q);

void write_tcr_histogram_csv(const RunSummary& summary, std::ostream& out);
void write_tcr_bucket_csv(std::span<const TcrBucket> buckets, std::ostream& out);
void write_bin_occupancy_csv(const RunSummary& summary, std::ostream& out);
/// One row per labelled summary: speedup, tau, calls, tokens, emitted.
void write_summary_table_csv(std::span<const std::pair<std::string, RunSummary>> rows, std::ostream& out);

}  // namespace specdraft
