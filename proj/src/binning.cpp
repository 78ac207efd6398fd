#include "specdraft/binning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "specdraft/errors.hpp"

namespace specdraft {

namespace {

constexpr const char* kMagic = "specdraft-bins";
constexpr int kFormatVersion = 1;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double y) {
    ++n;
    const double delta = y - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (y - mean);
  }
  double loss(SplitCriterion c) const {
    const double sse = std::max(0.0, m2);
    return c == SplitCriterion::kNormalizedVariance ? sse / static_cast<double>(n) : sse;
  }
};

std::vector<CalibrationSample> sorted_by_x(std::span<const CalibrationSample> samples) {
  std::vector<CalibrationSample> s(samples.begin(), samples.end());
  std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  return s;
}

bool all_labels_equal(std::span<const CalibrationSample> s) {
  return std::all_of(s.begin(), s.end(), [&](const auto& c) { return c.y == s.front().y; });
}

std::string fmt17(double v) {
  if (std::isinf(v)) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Threshold between two consecutive distinct sorted x values such that lo < s <= hi.
double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

void grow(std::vector<CalibrationSample> node, int depth_left, SplitCriterion criterion,
          std::vector<double>& thresholds) {
  if (depth_left == 0 || node.size() < 2 || all_labels_equal(node)) return;
  const auto split = best_split(node, criterion);
  if (!split) return;
  thresholds.push_back(split->threshold);
  std::vector<CalibrationSample> left;
  std::vector<CalibrationSample> right;
  for (const auto& s : node) (s.x < split->threshold ? left : right).push_back(s);
  node.clear();
  node.shrink_to_fit();
  grow(std::move(left), depth_left - 1, criterion, thresholds);
  grow(std::move(right), depth_left - 1, criterion, thresholds);
}

}  // namespace

std::string to_string(SplitCriterion c) {
  return c == SplitCriterion::kNormalizedVariance ? "normalized" : "sse";
}

SplitCriterion parse_split_criterion(const std::string& text) {
  if (text == "normalized") return SplitCriterion::kNormalizedVariance;
  if (text == "sse") return SplitCriterion::kSumOfSquares;
  throw ConfigError("unknown split criterion '" + text + "'");
}

double leaf_loss(std::span<const CalibrationSample> samples, SplitCriterion criterion) {
  if (samples.empty()) return 0.0;
  double mean = 0.0;
  for (const auto& s : samples) mean += s.y;
  mean /= static_cast<double>(samples.size());
  double sse = 0.0;
  for (const auto& s : samples) sse += (s.y - mean) * (s.y - mean);
  return criterion == SplitCriterion::kNormalizedVariance ? sse / static_cast<double>(samples.size()) : sse;
}

std::optional<SplitResult> best_split(std::span<const CalibrationSample> samples, SplitCriterion criterion) {
  const auto s = sorted_by_x(samples);
  const std::size_t n = s.size();
  if (n < 2 || s.front().x == s.back().x) return std::nullopt;

  // suffix[i] holds the moments of s[i..n).
  std::vector<Moments> suffix(n + 1);
  for (std::size_t i = n; i-- > 0;) {
    suffix[i] = suffix[i + 1];
    suffix[i].add(s[i].y);
  }
  std::vector<std::pair<double, double>> candidates;  // (threshold, loss), ascending threshold
  Moments left;
  for (std::size_t i = 1; i < n; ++i) {
    left.add(s[i - 1].y);
    if (s[i].x == s[i - 1].x) continue;
    candidates.emplace_back(midpoint(s[i - 1].x, s[i].x), left.loss(criterion) + suffix[i].loss(criterion));
  }
  double min_loss = kInf;
  for (const auto& c : candidates) min_loss = std::min(min_loss, c.second);
  const double tol = 1e-12 * (1.0 + std::abs(min_loss));
  for (const auto& c : candidates) {
    if (c.second <= min_loss + tol) {
      return SplitResult{c.first, c.second, all_labels_equal(s)};
    }
  }
  return std::nullopt;  // unreachable: candidates is non-empty
}

BinningModel::BinningModel(std::vector<EntropyBin> bins, SplitCriterion criterion, double training_loss,
                           BinningMetadata metadata)
    : bins_(std::move(bins)), criterion_(criterion), training_loss_(training_loss), metadata_(std::move(metadata)) {
  if (bins_.empty()) throw ConfigError("binning model has no bins");
  if (bins_.front().lower != 0.0) throw ConfigError("first entropy bin must start at 0");
  if (!std::isinf(bins_.back().upper)) throw ConfigError("last entropy bin must extend to infinity");
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    if (!(bins_[i].upper > bins_[i].lower)) throw ConfigError("entropy bin " + std::to_string(i) + " is empty or inverted");
    if (i > 0 && bins_[i].lower != bins_[i - 1].upper) {
      throw ConfigError("entropy bins " + std::to_string(i - 1) + " and " + std::to_string(i) +
                        " overlap or leave a gap");
    }
  }
}

std::vector<double> BinningModel::thresholds() const {
  std::vector<double> t;
  for (std::size_t i = 0; i + 1 < bins_.size(); ++i) t.push_back(bins_[i].upper);
  return t;
}

std::size_t BinningModel::sample_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : bins_) n += b.count;
  return n;
}

std::size_t BinningModel::assign_bin(double x) const noexcept {
  // Number of thresholds <= x.
  std::size_t lo = 0;
  std::size_t hi = bins_.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (x < bins_[mid].upper) hi = mid;
    else lo = mid + 1;
  }
  return lo;
}

std::vector<std::size_t> BinningModel::low_bins() const {
  std::vector<std::size_t> low;
  const std::size_t n = std::min<std::size_t>(3, bins_.size() - 1);
  for (std::size_t i = 0; i < n; ++i) low.push_back(i);
  return low;
}

BinningModel train_cart(std::span<const CalibrationSample> samples, int depth, SplitCriterion criterion) {
  if (samples.empty()) throw ConfigError("train_cart: no calibration samples");
  if (depth < 0) throw ConfigError("train_cart: depth must be >= 0");
  for (const auto& s : samples) {
    if (!(s.x >= 0.0) || !std::isfinite(s.x)) throw ConfigError("train_cart: entropy values must be finite and >= 0");
  }
  std::vector<double> thresholds;
  grow(sorted_by_x(samples), depth, criterion, thresholds);
  std::sort(thresholds.begin(), thresholds.end());

  std::vector<EntropyBin> bins(thresholds.size() + 1);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    bins[i].lower = i == 0 ? 0.0 : thresholds[i - 1];
    bins[i].upper = i == thresholds.size() ? kInf : thresholds[i];
  }
  std::vector<std::vector<CalibrationSample>> members(bins.size());
  BinningModel probe(bins, criterion, 0.0);
  for (const auto& s : samples) members[probe.assign_bin(s.x)].push_back(s);
  double loss = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    double sum = 0.0;
    for (const auto& s : members[i]) sum += s.y;
    bins[i].count = members[i].size();
    bins[i].mean_label = members[i].empty() ? 0.0 : sum / static_cast<double>(members[i].size());
    loss += leaf_loss(members[i], criterion);
  }
  return BinningModel(std::move(bins), criterion, loss);
}

void write_bins(const BinningModel& model, std::ostream& out) {
  const auto& m = model.metadata();
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "criterion " << to_string(model.criterion()) << '\n';
  out << "entropy_k " << m.entropy_k << '\n';
  out << "base_depth " << m.base_depth << '\n';
  out << "filter " << (m.filter.empty() ? "-" : m.filter) << '\n';
  out << "label " << (m.label.empty() ? "-" : m.label) << '\n';
  out << "corpus_hash " << (m.corpus_hash.empty() ? "-" : m.corpus_hash) << '\n';
  out << "samples " << model.sample_count() << '\n';
  out << "training_loss " << fmt17(model.training_loss()) << '\n';
  out << "bins " << model.bin_count() << '\n';
  for (std::size_t i = 0; i < model.bin_count(); ++i) {
    const auto& b = model.bins()[i];
    out << "bin " << i << ' ' << fmt17(b.lower) << ' ' << fmt17(b.upper) << ' ' << fmt17(b.mean_label) << ' '
        << b.count << '\n';
  }
  out << "end\n";
}

namespace {

class BinReader {
 public:
  explicit BinReader(std::istream& in) : in_(in) {}

  std::istringstream next(const std::string& key) {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError(line_ + 1, key, "unexpected end of file");
    ++line_;
    std::istringstream fields(line);
    std::string found;
    fields >> found;
    if (found != key) throw ParseError(line_, key, "expected key, found '" + found + "'");
    return fields;
  }

  std::string word(std::istringstream& f, const std::string& field) {
    std::string w;
    if (!(f >> w)) throw ParseError(line_, field, "missing value");
    return w;
  }

  double real(std::istringstream& f, const std::string& field) {
    const std::string w = word(f, field);
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end == w.c_str() || *end != '\0' || std::isnan(v)) throw ParseError(line_, field, "not a number: '" + w + "'");
    return v;
  }

  std::size_t count(std::istringstream& f, const std::string& field) {
    const std::string w = word(f, field);
    if (w.empty() || w.find_first_not_of("0123456789") != std::string::npos) {
      throw ParseError(line_, field, "not a non-negative integer: '" + w + "'");
    }
    return static_cast<std::size_t>(std::stoull(w));
  }

  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::string dash_to_empty(std::string s) { return s == "-" ? std::string() : s; }

}  // namespace

BinningModel read_bins(std::istream& in) {
  BinReader r(in);
  auto head = r.next(kMagic);
  if (r.count(head, "version") != static_cast<std::size_t>(kFormatVersion)) {
    throw ParseError(r.line(), "version", "unsupported version");
  }
  auto crit = r.next("criterion");
  SplitCriterion criterion{};
  try {
    criterion = parse_split_criterion(r.word(crit, "criterion"));
  } catch (const ConfigError& e) {
    throw ParseError(r.line(), "criterion", e.what());
  }
  BinningMetadata meta;
  auto k = r.next("entropy_k");
  meta.entropy_k = r.count(k, "entropy_k");
  auto d = r.next("base_depth");
  meta.base_depth = static_cast<int>(r.count(d, "base_depth"));
  auto f = r.next("filter");
  meta.filter = dash_to_empty(r.word(f, "filter"));
  auto l = r.next("label");
  meta.label = dash_to_empty(r.word(l, "label"));
  auto h = r.next("corpus_hash");
  meta.corpus_hash = dash_to_empty(r.word(h, "corpus_hash"));
  auto s = r.next("samples");
  const std::size_t samples = r.count(s, "samples");
  auto tl = r.next("training_loss");
  const double loss = r.real(tl, "training_loss");
  auto nb = r.next("bins");
  const std::size_t n_bins = r.count(nb, "bins");
  if (n_bins == 0) throw ParseError(r.line(), "bins", "at least one bin is required");

  std::vector<EntropyBin> bins(n_bins);
  std::size_t total = 0;
  for (std::size_t i = 0; i < n_bins; ++i) {
    auto b = r.next("bin");
    if (r.count(b, "bin.index") != i) throw ParseError(r.line(), "bin.index", "bin indices must be consecutive");
    bins[i].lower = r.real(b, "bin.lower");
    bins[i].upper = r.real(b, "bin.upper");
    bins[i].mean_label = r.real(b, "bin.mean");
    bins[i].count = r.count(b, "bin.count");
    total += bins[i].count;
    if (i > 0 && bins[i].lower != bins[i - 1].upper) {
      throw ParseError(r.line(), "bin.lower", "interval overlaps or leaves a gap with the previous bin");
    }
  }
  if (total != samples) throw ParseError(r.line(), "bin.count", "bin counts do not add up to the sample count");
  r.next("end");
  try {
    return BinningModel(std::move(bins), criterion, loss, std::move(meta));
  } catch (const ConfigError& e) {
    throw ParseError(r.line(), "bins", e.what());
  }
}

void save_bins(const BinningModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write binning model '" + path + "'");
  write_bins(model, out);
}

BinningModel load_bins(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open binning model '" + path + "'");
  return read_bins(in);
}

}  // namespace specdraft
