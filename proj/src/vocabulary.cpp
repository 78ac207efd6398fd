#include "specdraft/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "specdraft/errors.hpp"

namespace specdraft {

std::string_view to_string(TokenizationMode mode) noexcept {
  return mode == TokenizationMode::kCharacter ? "char" : "word";
}

TokenizationMode parse_tokenization_mode(std::string_view text) {
  if (text == "char" || text == "character") return TokenizationMode::kCharacter;
  if (text == "word") return TokenizationMode::kWord;
  throw ConfigError("unknown tokenization mode '" + std::string(text) + "'");
}

Vocabulary::Vocabulary(std::vector<std::string> symbols, TokenizationMode mode)
    : symbols_(std::move(symbols)), mode_(mode) {
  if (symbols_.size() < 2) throw ConfigError("vocabulary needs at least 2 symbols");
  bool has_unknown = false;
  for (TokenId i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], i).second) {
      throw ConfigError("duplicate vocabulary symbol '" + symbols_[i] + "'");
    }
    if (symbols_[i] == kUnknownSymbol) {
      unknown_ = i;
      has_unknown = true;
    } else if (symbols_[i] == kTerminatorSymbol) {
      terminator_ = i;
    }
  }
  if (!has_unknown) throw ConfigError("vocabulary lacks the reserved <unk> symbol");
}

TokenId Vocabulary::id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  return it == index_.end() ? unknown_ : it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view document) const {
  std::vector<TokenId> out;
  for (const auto& s : split_symbols(document, mode_)) out.push_back(id(s));
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (mode_ == TokenizationMode::kWord && i > 0) out += ' ';
    out += symbol(tokens[i]);
  }
  return out;
}

std::vector<std::string> split_symbols(std::string_view document, TokenizationMode mode) {
  std::vector<std::string> out;
  if (mode == TokenizationMode::kCharacter) {
    std::size_t i = 0;
    while (i < document.size()) {
      const auto lead = static_cast<unsigned char>(document[i]);
      std::size_t len = 1;
      if (lead >= 0xF0) len = 4;
      else if (lead >= 0xE0) len = 3;
      else if (lead >= 0xC0) len = 2;
      len = std::min(len, document.size() - i);
      out.emplace_back(document.substr(i, len));
      i += len;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < document.size()) {
    while (i < document.size() && std::isspace(static_cast<unsigned char>(document[i]))) ++i;
    std::size_t j = i;
    while (j < document.size() && !std::isspace(static_cast<unsigned char>(document[j]))) ++j;
    if (j > i) out.emplace_back(document.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocabulary build_vocab(const Corpus& corpus, TokenizationMode mode, bool with_terminator) {
  std::vector<std::string> symbols;
  std::unordered_map<std::string, bool> seen;
  for (const auto& doc : corpus) {
    for (auto& s : split_symbols(doc, mode)) {
      if (s == kUnknownSymbol || s == kTerminatorSymbol) continue;
      if (seen.emplace(s, true).second) symbols.push_back(std::move(s));
    }
  }
  if (symbols.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  symbols.emplace_back(kUnknownSymbol);
  if (with_terminator) symbols.emplace_back(kTerminatorSymbol);
  return Vocabulary(std::move(symbols), mode);
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus '" + path + "'");
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) corpus.push_back(std::move(line));
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write corpus '" + path + "'");
  for (const auto& doc : corpus) out << doc << '\n';
}

}  // namespace specdraft
