#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "specdraft/prob_dist.hpp"

namespace specdraft {

enum class TokenizationMode { kCharacter, kWord };

std::string_view to_string(TokenizationMode mode) noexcept;
/// Accepts "char" / "character" and "word". Throws ConfigError otherwise.
TokenizationMode parse_tokenization_mode(std::string_view text);

/// A corpus is a list of documents (one per input line).
using Corpus = std::vector<std::string>;

inline constexpr std::string_view kUnknownSymbol = "<unk>";
inline constexpr std::string_view kTerminatorSymbol = "</s>";

/// Closed symbol inventory. Ids follow first appearance in the corpus; the
/// reserved <unk> (and optional </s>) come last.
class Vocabulary {
 public:
  /// Throws ConfigError on duplicate symbols, missing <unk>, or fewer than 2 symbols.
  Vocabulary(std::vector<std::string> symbols, TokenizationMode mode);

  std::size_t size() const noexcept { return symbols_.size(); }
  TokenizationMode mode() const noexcept { return mode_; }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& symbol(TokenId id) const { return symbols_.at(id); }

  TokenId unknown() const noexcept { return unknown_; }
  std::optional<TokenId> terminator() const noexcept { return terminator_; }

  /// Id for a symbol; unknown symbols map to <unk>.
  TokenId id(std::string_view symbol) const;

  std::vector<TokenId> encode(std::string_view document) const;
  std::string decode(std::span<const TokenId> tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.mode_ == b.mode_ && a.symbols_ == b.symbols_;
  }

 private:
  std::vector<std::string> symbols_;
  TokenizationMode mode_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId unknown_ = 0;
  std::optional<TokenId> terminator_;
};

/// Splits a document into symbols: UTF-8 code points or whitespace-separated words.
std::vector<std::string> split_symbols(std::string_view document, TokenizationMode mode);

/// Builds the vocabulary of a non-empty corpus, plus <unk> (and </s> when requested).
Vocabulary build_vocab(const Corpus& corpus, TokenizationMode mode, bool with_terminator = false);

/// Reads a UTF-8 corpus, one document per non-empty line.
Corpus read_corpus(const std::string& path);
void write_corpus(const Corpus& corpus, const std::string& path);

}  // namespace specdraft
