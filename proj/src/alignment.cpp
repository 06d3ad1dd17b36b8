#include "faitheval/alignment.hpp"

#include <array>
#include <cctype>

namespace faitheval {

namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

// Latin-1 supplement U+00C0..U+00FF folded to lowercase ASCII; 0 keeps the
// code point as is.
constexpr std::array<char, 64> kLatin1Fold = {
    'a', 'a', 'a', 'a', 'a', 'a', 0,   'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
    0,   'n', 'o', 'o', 'o', 'o', 'o', 0,   'o', 'u', 'u', 'u', 'u', 'y', 0,   0,
    'a', 'a', 'a', 'a', 'a', 'a', 0,   'c', 'e', 'e', 'e', 'e', 'i', 'i', 'i', 'i',
    0,   'n', 'o', 'o', 'o', 'o', 'o', 0,   'o', 'u', 'u', 'u', 'u', 'y', 0,   'y'};

enum class Marker { None, Continuation, WordInitial };

struct Stripped {
  std::string_view body;
  Marker marker;
};

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

Stripped strip_marker(std::string_view token, TokenScheme scheme) {
  if (starts_with(token, "##")) return {token.substr(2), Marker::Continuation};
  if (scheme == TokenScheme::BPELike) {
    for (std::string_view m : {std::string_view("\xC4\xA0"), std::string_view("\xE2\x96\x81")}) {
      if (starts_with(token, m)) return {token.substr(m.size()), Marker::WordInitial};
    }
  }
  return {token, Marker::None};
}

bool is_prefix(std::string_view prefix, std::string_view whole) {
  return prefix.size() <= whole.size() && whole.substr(0, prefix.size()) == prefix;
}

WordMap map_by_offsets(std::span<const TokenPiece> tokens, std::span<const WordSpan> words) {
  std::vector<std::string> texts;
  for (const auto& w : words) texts.push_back(w.text);
  std::vector<std::size_t> token_to_word;
  std::size_t w = 0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (!tokens[t].span) {
      throw AlignmentError("token " + std::to_string(t) + " ('" + tokens[t].text +
                           "') has no character span");
    }
    const auto [b, e] = *tokens[t].span;
    if (b >= e) throw AlignmentError("token " + std::to_string(t) + " has an empty span");
    while (w < words.size() && b >= words[w].end) ++w;
    if (w == words.size() || b < words[w].begin || e > words[w].end) {
      throw AlignmentError("token " + std::to_string(t) + " span [" + std::to_string(b) + ", " +
                           std::to_string(e) + ") does not fall inside a single word");
    }
    token_to_word.push_back(w);
  }
  try {
    return WordMap(std::move(texts), std::move(token_to_word));
  } catch (const InvalidInput& err) {
    throw AlignmentError(err.what());
  }
}

}  // namespace

std::vector<WordSpan> segment_word_spans(std::string_view text) {
  std::vector<WordSpan> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    out.push_back(WordSpan{std::string(text.substr(b, e - b)), b, e});
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && !is_space(static_cast<unsigned char>(text[end]))) ++end;
    std::size_t b = i, e = end;
    while (b < e && is_punct(static_cast<unsigned char>(text[b]))) {
      emit(b, b + 1);
      ++b;
    }
    std::size_t core_end = e;
    while (core_end > b && is_punct(static_cast<unsigned char>(text[core_end - 1]))) --core_end;
    if (core_end > b) emit(b, core_end);
    for (std::size_t p = core_end; p < e; ++p) emit(p, p + 1);
    i = end;
  }
  return out;
}

std::vector<std::string> segment_words(std::string_view text) {
  std::vector<std::string> words;
  for (auto& w : segment_word_spans(text)) words.push_back(std::move(w.text));
  return words;
}

std::string normalize_for_matching(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      out.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    // Two-byte sequences C3 80..C3 BF encode U+00C0..U+00FF.
    if (c == 0xC3 && i + 1 < s.size()) {
      const auto next = static_cast<unsigned char>(s[i + 1]);
      if (next >= 0x80 && next <= 0xBF) {
        const char folded = kLatin1Fold[next - 0x80];
        if (folded != 0) {
          out.push_back(folded);
          ++i;
          continue;
        }
      }
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

WordMap::WordMap(std::vector<std::string> words, std::vector<std::size_t> token_to_word)
    : words_(std::move(words)), token_to_word_(std::move(token_to_word)),
      word_to_tokens_(words_.size()) {
  for (std::size_t t = 0; t < token_to_word_.size(); ++t) {
    const auto w = token_to_word_[t];
    if (w >= words_.size()) {
      throw InvalidInput("token " + std::to_string(t) + " maps to word " + std::to_string(w) +
                         " of " + std::to_string(words_.size()));
    }
    if (t > 0 && w != token_to_word_[t - 1] && w != token_to_word_[t - 1] + 1) {
      throw InvalidInput("token " + std::to_string(t) + " breaks word order");
    }
    word_to_tokens_[w].push_back(t);
  }
  if (!token_to_word_.empty() && token_to_word_.front() != 0) {
    throw InvalidInput("first token does not start the first word");
  }
  for (std::size_t w = 0; w < words_.size(); ++w) {
    if (word_to_tokens_[w].empty()) {
      throw InvalidInput("word " + std::to_string(w) + " ('" + words_[w] + "') has no tokens");
    }
  }
}

WordMap WordMap::identity(std::vector<std::string> words) {
  std::vector<std::size_t> ids(words.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return WordMap(std::move(words), std::move(ids));
}

WordMap WordMap::of(const TaskExample& example) {
  std::vector<std::size_t> token_to_word;
  token_to_word.reserve(example.tokens.size());
  for (const auto& t : example.tokens) token_to_word.push_back(t.word_index);
  return WordMap(example.words, std::move(token_to_word));
}

WordMap map_tokens_to_words(std::span<const TokenPiece> tokens, TokenScheme scheme,
                            std::span<const WordSpan> words) {
  if (scheme == TokenScheme::CharOffsets) return map_by_offsets(tokens, words);

  std::vector<std::string> texts;
  std::vector<std::string> normalized;
  for (const auto& w : words) {
    texts.push_back(w.text);
    normalized.push_back(normalize_for_matching(w.text));
  }

  std::vector<std::size_t> token_to_word;
  std::size_t w = 0;
  std::string consumed;
  auto diverge = [&](std::size_t t, const std::string& why) {
    const std::string expected = w < texts.size() ? texts[w] : std::string("<end of text>");
    return AlignmentError("tokens diverge from words at token " + std::to_string(t) + " ('" +
                          tokens[t].text + "'), word " + std::to_string(w) + " ('" + expected +
                          "'): " + why);
  };

  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto [body, marker] = strip_marker(tokens[t].text, scheme);
    if (w >= texts.size()) throw diverge(t, "token beyond the last word");
    const bool starting = consumed.empty();
    if (starting && marker == Marker::Continuation) {
      throw diverge(t, "continuation piece cannot start a word");
    }
    if (!starting && marker == Marker::WordInitial) {
      throw diverge(t, "word-initial token inside an unfinished word");
    }
    if (!starting && scheme == TokenScheme::WordPieceLike && marker != Marker::Continuation) {
      throw diverge(t, "word '" + consumed + "' is unfinished");
    }
    std::string candidate = consumed + std::string(body);
    bool complete = false;
    if (is_prefix(candidate, texts[w])) {
      complete = candidate.size() == texts[w].size();
    } else {
      const auto norm = normalize_for_matching(candidate);
      if (!is_prefix(norm, normalized[w])) throw diverge(t, "spelling does not match");
      complete = norm.size() == normalized[w].size();
    }
    token_to_word.push_back(w);
    if (complete) {
      ++w;
      consumed.clear();
    } else {
      consumed = std::move(candidate);
    }
  }
  if (!consumed.empty() || w != texts.size()) {
    const std::string missing = w < texts.size() ? texts[w] : std::string();
    throw AlignmentError("tokens end before word " + std::to_string(w) + " ('" + missing +
                         "') is complete");
  }
  return WordMap(std::move(texts), std::move(token_to_word));
}

WordMap map_tokens_to_words(std::span<const std::string> tokens, TokenScheme scheme,
                            std::span<const std::string> words) {
  std::vector<TokenPiece> pieces;
  for (const auto& t : tokens) pieces.push_back(TokenPiece{t, std::nullopt});
  std::vector<WordSpan> spans;
  for (const auto& w : words) spans.push_back(WordSpan{w, 0, 0});
  return map_tokens_to_words(pieces, scheme, spans);
}

AttributionVector aggregate_to_words(const AttributionVector& token_attrib, const WordMap& map) {
  if (token_attrib.size() != map.token_count()) {
    throw InvalidInput("token attribution has " + std::to_string(token_attrib.size()) +
                       " entries for " + std::to_string(map.token_count()) + " tokens");
  }
  std::vector<double> words(map.word_count(), 0.0);
  const auto& values = token_attrib.values();
  for (std::size_t t = 0; t < values.size(); ++t) words[map.word_of(t)] += values[t];
  return AttributionVector::dense(Modality::Language, std::move(words));
}

}  // namespace faitheval
