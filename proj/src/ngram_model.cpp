#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "specdraft/errors.hpp"
#include "specdraft/language_model.hpp"

namespace specdraft {

namespace {

constexpr std::string_view kMagic = "specdraft-ngram";
constexpr int kFormatVersion = 1;

std::string pack(std::span<const TokenId> tokens) {
  std::string key(tokens.size() * sizeof(TokenId), '\0');
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::memcpy(key.data() + i * sizeof(TokenId), &tokens[i], sizeof(TokenId));
  }
  return key;
}

std::vector<TokenId> unpack(const std::string& key) {
  std::vector<TokenId> tokens(key.size() / sizeof(TokenId));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::memcpy(&tokens[i], key.data() + i * sizeof(TokenId), sizeof(TokenId));
  }
  return tokens;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

NGramModel::NGramModel(Vocabulary vocab, int order, double smoothing)
    : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing) {
  if (order_ < 1) throw ConfigError("n-gram order must be >= 1");
  if (!(smoothing_ > 0.0)) throw ConfigError("n-gram smoothing constant must be > 0");
  tables_.resize(static_cast<std::size_t>(order_));
}

NGramModel NGramModel::train(const Vocabulary& vocab, const std::vector<std::vector<TokenId>>& documents,
                             int order, double smoothing) {
  NGramModel model(vocab, order, smoothing);
  // Build in ordered maps so successor lists come out sorted.
  std::vector<std::unordered_map<std::string, std::map<TokenId, std::uint32_t>>> raw(
      static_cast<std::size_t>(order));
  for (const auto& doc : documents) {
    for (std::size_t pos = 0; pos < doc.size(); ++pos) {
      if (doc[pos] >= vocab.size()) throw ConfigError("training token outside the vocabulary");
      const std::size_t max_len = std::min<std::size_t>(static_cast<std::size_t>(order) - 1, pos);
      for (std::size_t len = 0; len <= max_len; ++len) {
        std::span<const TokenId> ctx(doc.data() + pos - len, len);
        ++raw[len][pack(ctx)][doc[pos]];
      }
    }
  }
  for (std::size_t len = 0; len < raw.size(); ++len) {
    for (auto& [key, succ] : raw[len]) {
      ContextCounts cc;
      cc.successors.assign(succ.begin(), succ.end());
      for (const auto& [tok, n] : succ) cc.total += n;
      model.tables_[len].emplace(key, std::move(cc));
    }
  }
  return model;
}

NGramModel NGramModel::train(const Vocabulary& vocab, const Corpus& corpus, int order, double smoothing) {
  std::vector<std::vector<TokenId>> docs;
  docs.reserve(corpus.size());
  for (const auto& doc : corpus) {
    docs.push_back(vocab.encode(doc));
    if (auto term = vocab.terminator()) docs.back().push_back(*term);
  }
  return train(vocab, docs, order, smoothing);
}

const NGramModel::ContextCounts* NGramModel::counts(std::span<const TokenId> context) const {
  if (context.size() >= tables_.size()) return nullptr;
  const auto& table = tables_[context.size()];
  auto it = table.find(pack(context));
  return it == table.end() ? nullptr : &it->second;
}

ProbDist NGramModel::next_dist(std::span<const TokenId> context) const {
  const std::size_t v = vocab_.size();
  std::size_t len = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order_) - 1);
  for (;; --len) {
    const ContextCounts* cc = counts(context.subspan(context.size() - len));
    if (cc != nullptr && cc->total > 0) {
      const double denom = static_cast<double>(cc->total) + smoothing_ * static_cast<double>(v);
      std::vector<double> p(v, smoothing_ / denom);
      for (const auto& [tok, n] : cc->successors) p[tok] = (static_cast<double>(n) + smoothing_) / denom;
      return ProbDist::normalize(std::move(p));
    }
    if (len == 0) break;
  }
  // Nothing observed at all: add-k over zero counts is uniform.
  return ProbDist::uniform(v);
}

void NGramModel::write(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "mode " << to_string(vocab_.mode()) << '\n';
  out << "order " << order_ << '\n';
  out << "smoothing " << format_double(smoothing_) << '\n';
  out << "symbols " << vocab_.size() << '\n';
  for (TokenId i = 0; i < vocab_.size(); ++i) {
    out << "symbol " << i << ' ' << nlohmann::json(vocab_.symbol(i)).dump() << '\n';
  }
  std::size_t n_contexts = 0;
  for (const auto& t : tables_) n_contexts += t.size();
  out << "contexts " << n_contexts << '\n';
  for (std::size_t len = 0; len < tables_.size(); ++len) {
    std::vector<std::pair<std::vector<TokenId>, const ContextCounts*>> rows;
    rows.reserve(tables_[len].size());
    for (const auto& [key, cc] : tables_[len]) rows.emplace_back(unpack(key), &cc);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [ctx, cc] : rows) {
      out << "ctx " << len;
      for (TokenId t : ctx) out << ' ' << t;
      out << " | " << cc->total << ' ' << cc->successors.size();
      for (const auto& [tok, n] : cc->successors) out << ' ' << tok << ':' << n;
      out << '\n';
    }
  }
  out << "end\n";
}

void NGramModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write n-gram model '" + path + "'");
  write(out);
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(std::string_view expected_key) {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError(line_no_ + 1, std::string(expected_key), "unexpected end of file");
    ++line_no_;
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key != expected_key) throw ParseError(line_no_, std::string(expected_key), "expected key, found '" + key + "'");
    return fields;
  }

  template <typename T>
  T field(std::istringstream& fields, std::string_view name) {
    T value{};
    if (!(fields >> value)) throw ParseError(line_no_, std::string(name), "missing or malformed value");
    return value;
  }

  std::size_t line() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

NGramModel NGramModel::read(std::istream& in) {
  LineReader r(in);
  auto header = r.next(kMagic);
  if (r.field<int>(header, "version") != kFormatVersion) throw ParseError(r.line(), "version", "unsupported version");

  auto mode_line = r.next("mode");
  TokenizationMode mode{};
  try {
    mode = parse_tokenization_mode(r.field<std::string>(mode_line, "mode"));
  } catch (const ConfigError& e) {
    throw ParseError(r.line(), "mode", e.what());
  }
  auto order_line = r.next("order");
  const int order = r.field<int>(order_line, "order");
  auto smooth_line = r.next("smoothing");
  const auto smooth_text = r.field<std::string>(smooth_line, "smoothing");
  double smoothing = 0.0;
  try {
    smoothing = std::stod(smooth_text);
  } catch (const std::exception&) {
    throw ParseError(r.line(), "smoothing", "not a number");
  }

  auto sym_count_line = r.next("symbols");
  const auto n_symbols = r.field<std::size_t>(sym_count_line, "symbols");
  std::vector<std::string> symbols;
  symbols.reserve(n_symbols);
  for (std::size_t i = 0; i < n_symbols; ++i) {
    auto sym = r.next("symbol");
    if (r.field<std::size_t>(sym, "symbol.id") != i) throw ParseError(r.line(), "symbol.id", "ids must be consecutive");
    std::string rest;
    std::getline(sym >> std::ws, rest);
    try {
      symbols.push_back(nlohmann::json::parse(rest).get<std::string>());
    } catch (const std::exception&) {
      throw ParseError(r.line(), "symbol.text", "expected a JSON string");
    }
  }

  NGramModel model = [&] {
    try {
      return NGramModel(Vocabulary(std::move(symbols), mode), order, smoothing);
    } catch (const ConfigError& e) {
      throw ParseError(r.line(), "header", e.what());
    }
  }();

  auto ctx_count_line = r.next("contexts");
  const auto n_contexts = r.field<std::size_t>(ctx_count_line, "contexts");
  const std::size_t v = model.vocab_.size();
  for (std::size_t c = 0; c < n_contexts; ++c) {
    auto row = r.next("ctx");
    const auto len = r.field<std::size_t>(row, "ctx.length");
    if (len >= static_cast<std::size_t>(order)) throw ParseError(r.line(), "ctx.length", "context longer than order - 1");
    std::vector<TokenId> ctx(len);
    for (auto& t : ctx) {
      t = r.field<TokenId>(row, "ctx.token");
      if (t >= v) throw ParseError(r.line(), "ctx.token", "token outside vocabulary");
    }
    if (r.field<std::string>(row, "ctx.separator") != "|") throw ParseError(r.line(), "ctx.separator", "expected '|'");
    ContextCounts cc;
    cc.total = r.field<std::uint64_t>(row, "ctx.total");
    const auto n_succ = r.field<std::size_t>(row, "ctx.successors");
    std::uint64_t sum = 0;
    for (std::size_t s = 0; s < n_succ; ++s) {
      const auto pair = r.field<std::string>(row, "ctx.successor");
      const auto colon = pair.find(':');
      TokenId tok = 0;
      std::uint32_t n = 0;
      if (colon == std::string::npos ||
          std::from_chars(pair.data(), pair.data() + colon, tok).ec != std::errc{} ||
          std::from_chars(pair.data() + colon + 1, pair.data() + pair.size(), n).ec != std::errc{}) {
        throw ParseError(r.line(), "ctx.successor", "expected <token>:<count>");
      }
      if (tok >= v) throw ParseError(r.line(), "ctx.successor", "token outside vocabulary");
      if (!cc.successors.empty() && tok <= cc.successors.back().first) {
        throw ParseError(r.line(), "ctx.successor", "successors must be strictly increasing");
      }
      cc.successors.emplace_back(tok, n);
      sum += n;
    }
    if (sum != cc.total) throw ParseError(r.line(), "ctx.total", "total does not match successor counts");
    if (!model.tables_[len].emplace(pack(ctx), std::move(cc)).second) {
      throw ParseError(r.line(), "ctx", "duplicate context");
    }
  }
  r.next("end");
  return model;
}

NGramModel NGramModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open n-gram model '" + path + "'");
  return read(in);
}

}  // namespace specdraft
