#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faitheval/core.hpp"

namespace faitheval {

// How a tokenizer marks word structure.
//   WordPieceLike: continuation pieces carry a "##" prefix; every other token
//                  starts a word.
//   BPELike:       a leading "Ġ" or "▁" marks a word-initial token, "##"
//                  marks a continuation; unmarked tokens are placed by
//                  character consumption.
//   CharOffsets:   tokens carry explicit byte spans into the source text.
enum class TokenScheme { WordPieceLike, BPELike, CharOffsets };

struct WordSpan {
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
};

struct TokenPiece {
  std::string text;
  std::optional<std::pair<std::size_t, std::size_t>> span;  // CharOffsets only
};

// Maximal runs of non-whitespace, with leading and trailing ASCII
// punctuation split off one character per word.
std::vector<WordSpan> segment_word_spans(std::string_view text);
std::vector<std::string> segment_words(std::string_view text);

// Lowercase and strip Latin-1 accents. Used as the fallback comparison when
// the exact spelling differs between tokenizer and word list.
std::string normalize_for_matching(std::string_view s);

// Order-preserving partition of the token sequence into words.
class WordMap {
 public:
  WordMap(std::vector<std::string> words, std::vector<std::size_t> token_to_word);

  static WordMap identity(std::vector<std::string> words);
  static WordMap of(const TaskExample& example);

  const std::vector<std::string>& words() const { return words_; }
  std::size_t word_count() const { return words_.size(); }
  std::size_t token_count() const { return token_to_word_.size(); }
  std::size_t word_of(std::size_t token) const { return token_to_word_.at(token); }
  const std::vector<std::size_t>& tokens_of(std::size_t word) const { return word_to_tokens_.at(word); }

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> token_to_word_;
  std::vector<std::vector<std::size_t>> word_to_tokens_;
};

// Throws AlignmentError naming the first divergent span when the tokens do not
// reconstruct the words.
WordMap map_tokens_to_words(std::span<const TokenPiece> tokens, TokenScheme scheme,
                            std::span<const WordSpan> words);
WordMap map_tokens_to_words(std::span<const std::string> tokens, TokenScheme scheme,
                            std::span<const std::string> words);

// Word relevance = left-to-right sum of the member tokens' relevances.
AttributionVector aggregate_to_words(const AttributionVector& token_attrib, const WordMap& map);

}  // namespace faitheval
