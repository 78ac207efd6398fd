#include "specdraft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "specdraft/errors.hpp"

namespace specdraft {

std::size_t tcr(const AcceptResult& result, const RerankedTree& selected) {
  if (result.accepted_path.empty()) return selected.size() + 1;
  const auto r = selected.rank(result.accepted_path.back());
  if (!r) throw ContractViolation("tcr: accepted node is not part of T2");
  return *r;
}

RunSummary summarize(std::span<const IterationRecord> records, const CostModel& cost) {
  if (records.empty()) throw ConfigError("summarize: no iteration records");
  if (cost.call < 0 || cost.token < 0 || cost.draft_layer < 0) throw ConfigError("cost model entries must be >= 0");
  RunSummary s;
  s.cost = cost;
  double denom = 0.0;
  std::map<int, std::uint64_t> accepted_per_bin;
  for (const auto& r : records) {
    s.emitted += r.accepted_len + 1;
    ++s.calls;
    s.tokens += r.tokens_verified;
    if (r.accepted_len > 0) ++s.tcr_histogram[r.tcr];
    else ++s.no_accept_iterations;
    auto& b = s.per_bin[r.bin];
    ++b.iterations;
    accepted_per_bin[r.bin] += r.accepted_len;
    s.max_depth_used = std::max(s.max_depth_used, r.depth_used);
    denom += cost.call + cost.token * static_cast<double>(r.tokens_verified) +
             cost.draft_layer * static_cast<double>(r.depth_used);
  }
  for (auto& [bin, stats] : s.per_bin) {
    stats.mean_accepted = static_cast<double>(accepted_per_bin[bin]) / static_cast<double>(stats.iterations);
  }
  s.tau = static_cast<double>(s.emitted) / static_cast<double>(s.calls);
  if (!(denom > 0.0)) throw ConfigError("cost model assigns zero cost to every iteration");
  s.estimated_speedup = static_cast<double>(s.emitted) * (cost.call + cost.token) / denom;
  return s;
}

std::size_t nearest_rank(std::span<const std::size_t> sorted, double q) {
  if (sorted.empty()) throw ConfigError("nearest_rank: empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * n));
  idx = std::clamp<std::size_t>(idx, 1, sorted.size());
  return sorted[idx - 1];
}

TcrQuantiles tcr_quantiles(std::span<const IterationRecord> records) {
  std::vector<std::size_t> ranks;
  TcrQuantiles q;
  for (const auto& r : records) {
    if (r.accepted_len > 0) ranks.push_back(r.tcr);
    else ++q.sentinel;
  }
  if (ranks.empty()) throw ConfigError("tcr_quantiles: no iteration accepted any token");
  std::sort(ranks.begin(), ranks.end());
  q.accepting = ranks.size();
  q.p25 = nearest_rank(ranks, 0.25);
  q.p50 = nearest_rank(ranks, 0.50);
  q.p75 = nearest_rank(ranks, 0.75);
  q.p95 = nearest_rank(ranks, 0.95);
  return q;
}

std::vector<TcrBucket> accepted_by_tcr_quartile(std::span<const IterationRecord> records) {
  std::vector<TcrBucket> buckets(4);
  std::vector<std::uint64_t> accepted(4, 0);
  for (int i = 0; i < 4; ++i) buckets[static_cast<std::size_t>(i)].quartile = i + 1;
  for (const auto& r : records) {
    if (r.accepted_len == 0 || r.budget == 0) continue;
    const auto q = static_cast<std::size_t>(
        std::clamp(std::ceil(4.0 * static_cast<double>(r.tcr) / static_cast<double>(r.budget)), 1.0, 4.0));
    ++buckets[q - 1].iterations;
    accepted[q - 1] += r.accepted_len;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (buckets[i].iterations > 0) {
      buckets[i].mean_accepted = static_cast<double>(accepted[i]) / static_cast<double>(buckets[i].iterations);
    }
  }
  return buckets;
}

std::vector<std::string> check_accounting(std::span<const IterationRecord> records, const RunSummary& summary) {
  std::vector<std::string> problems;
  std::uint64_t emitted = 0;
  std::uint64_t tokens = 0;
  int max_depth = 0;
  for (const auto& r : records) {
    emitted += r.accepted_len + 1;
    tokens += r.tokens_verified;
    max_depth = std::max(max_depth, r.depth_used);
    if (r.tcr < 1 || r.tcr > r.tokens_verified + 1) {
      problems.push_back("iteration " + std::to_string(r.index) + ": TCR outside [1, |T2|+1]");
    }
    if (r.tokens_verified > r.budget) problems.push_back("iteration " + std::to_string(r.index) + ": |T2| exceeds budget");
    if (r.accepted_len > static_cast<std::size_t>(r.depth_used)) {
      problems.push_back("iteration " + std::to_string(r.index) + ": accepted length exceeds tree depth");
    }
    if (r.accepted_len == 0 && r.tcr != r.tokens_verified + 1) {
      problems.push_back("iteration " + std::to_string(r.index) + ": empty acceptance without sentinel TCR");
    }
  }
  if (emitted != summary.emitted) problems.emplace_back("emitted != sum(accepted_len + 1)");
  if (summary.calls != records.size()) problems.emplace_back("calls != iteration count");
  if (tokens != summary.tokens) problems.emplace_back("tokens != sum(tokens_verified)");
  if (summary.tau != static_cast<double>(summary.emitted) / static_cast<double>(summary.calls)) {
    problems.emplace_back("tau != emitted / calls");
  }
  if (summary.tau < 1.0) problems.emplace_back("tau < 1");
  if (summary.tau > static_cast<double>(max_depth) + 1.0) problems.emplace_back("tau > max depth + 1");
  return problems;
}

namespace {

constexpr std::string_view kIterationsHeader =
    "prompt,index,entropy,bin,meta_path_truncated,depth_used,budget,tree_size,accepted_len,tcr,tokens_verified,"
    "meta_path_rank";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_iterations_csv(std::span<const IterationRecord> records, std::ostream& out) {
  out << kIterationsSchema << '\n' << kIterationsHeader << '\n';
  for (const auto& r : records) {
    out << r.prompt << ',' << r.index << ',' << fmt17(r.entropy) << ',' << r.bin << ','
        << (r.meta_path_truncated ? 1 : 0) << ',' << r.depth_used << ',' << r.budget << ',' << r.tree_size << ','
        << r.accepted_len << ',' << r.tcr << ',' << r.tokens_verified << ',' << r.meta_path_rank << '\n';
  }
}

std::vector<IterationRecord> read_iterations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kIterationsSchema) throw ParseError(1, "schema", "expected " + std::string(kIterationsSchema));
  if (!std::getline(in, line) || line != kIterationsHeader) throw ParseError(2, "header", "unexpected column header");
  std::vector<IterationRecord> records;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw ParseError(line_no, "row", "expected 12 columns");
    try {
      IterationRecord r;
      r.prompt = std::stoull(cells[0]);
      r.index = std::stoull(cells[1]);
      r.entropy = std::stod(cells[2]);
      r.bin = std::stoi(cells[3]);
      r.meta_path_truncated = cells[4] == "1";
      r.depth_used = std::stoi(cells[5]);
      r.budget = std::stoull(cells[6]);
      r.tree_size = std::stoull(cells[7]);
      r.accepted_len = std::stoull(cells[8]);
      r.tcr = std::stoull(cells[9]);
      r.tokens_verified = std::stoull(cells[10]);
      r.meta_path_rank = std::stoull(cells[11]);
      records.push_back(r);
    } catch (const std::exception&) {
      throw ParseError(line_no, "row", "malformed numeric cell");
    }
  }
  return records;
}

nlohmann::ordered_json to_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["schema"] = "specdraft.summary/1";
  j["emitted"] = s.emitted;
  j["calls"] = s.calls;
  j["tokens"] = s.tokens;
  j["tau"] = s.tau;
  j["max_depth_used"] = s.max_depth_used;
  j["no_accept_iterations"] = s.no_accept_iterations;
  auto& hist = j["tcr_histogram"];
  hist = nlohmann::ordered_json::object();
  for (const auto& [rank, n] : s.tcr_histogram) hist[std::to_string(rank)] = n;
  auto& bins = j["per_bin"];
  bins = nlohmann::ordered_json::object();
  for (const auto& [bin, st] : s.per_bin) {
    bins[std::to_string(bin)] = {{"iterations", st.iterations}, {"mean_accepted", st.mean_accepted}};
  }
  j["cost_model"] = {{"call", s.cost.call}, {"token", s.cost.token}, {"draft_layer", s.cost.draft_layer}};
  j["estimated_speedup"] = s.estimated_speedup;
  return j;
}

nlohmann::ordered_json to_json(const TcrQuantiles& q) {
  return {{"p25", q.p25}, {"p50", q.p50}, {"p75", q.p75}, {"p95", q.p95}, {"accepting", q.accepting},
          {"sentinel", q.sentinel}};
}

void write_tcr_histogram_csv(const RunSummary& summary, std::ostream& out) {
  out << "#schema=specdraft.tcr_histogram/1\ntcr,iterations\n";
  for (const auto& [rank, n] : summary.tcr_histogram) out << rank << ',' << n << '\n';
  out << "none," << summary.no_accept_iterations << '\n';
}

void write_tcr_bucket_csv(std::span<const TcrBucket> buckets, std::ostream& out) {
  out << "#schema=specdraft.tcr_buckets/1\ntcr_quartile,iterations,mean_accepted\n";
  for (const auto& b : buckets) out << b.quartile << ',' << b.iterations << ',' << fmt17(b.mean_accepted) << '\n';
}

void write_bin_occupancy_csv(const RunSummary& summary, std::ostream& out) {
  out << "#schema=specdraft.bin_occupancy/1\nbin,iterations,mean_accepted\n";
  for (const auto& [bin, st] : summary.per_bin) out << bin << ',' << st.iterations << ',' << fmt17(st.mean_accepted) << '\n';
}

void write_summary_table_csv(std::span<const std::pair<std::string, RunSummary>> rows, std::ostream& out) {
  out << "#schema=specdraft.table/1\nlabel,estimated_speedup,tau,calls,tokens,emitted\n";
  for (const auto& [label, s] : rows) {
    out << label << ',' << fmt17(s.estimated_speedup) << ',' << fmt17(s.tau) << ',' << s.calls << ',' << s.tokens << ','
        << s.emitted << '\n';
  }
}

}  // namespace specdraft
