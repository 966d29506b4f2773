#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/errors.hpp"
#include "ade/span.hpp"

namespace ade {

class NoTokenOverlap : public Error {
 public:
  using Error::Error;
};

struct Token {
  std::string surface;  // original casing, always equals the source slice
  std::size_t char_begin = 0;
  std::size_t char_end = 0;  // exclusive
};

struct TokenizedText {
  std::vector<Token> tokens;  // non-overlapping, increasing by char_begin
  std::string source;
};

// ASCII case fold; bytes outside ASCII pass through untouched.
std::string lowercase(std::string_view text);

// Splits on whitespace, then detaches leading/trailing punctuation of each
// chunk into single-character tokens. Interior punctuation (hyphens, dots
// inside abbreviations) stays attached. Empty text gives an empty list.
TokenizedText tokenize(std::string_view text);

// Token ids are assigned over lowercased surfaces; ids 0..3 are reserved.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kSep = 3;
  static constexpr std::size_t kReservedCount = 4;

  Vocabulary() = default;

  // tokens must be distinct lowercased surfaces; they receive ids 4, 5, ...
  static Vocabulary from_entries(std::vector<std::string> tokens,
                                 std::size_t min_count);

  // Case-folds the surface; unknown tokens map to kUnk.
  int lookup(std::string_view surface) const;

  const std::string& token_of(int id) const;

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t min_count() const { return min_count_; }

 private:
  std::vector<std::string> id_to_token_{"<PAD>", "<UNK>", "<BOS>", "<SEP>"};
  std::unordered_map<std::string, int> token_to_id_;
  std::size_t min_count_ = 1;
};

// Counts lowercased token surfaces across all sentences and keeps those with
// frequency >= min_count, ordered by descending count then token text.
Vocabulary build_vocab(const std::vector<LabeledSentence>& sentences,
                       std::size_t min_count);

std::vector<int> encode(const TokenizedText& text, const Vocabulary& vocab);

// Smallest token range covering every token that overlaps the char span.
TokenSpan char_span_to_token_span(const TokenizedText& text, CharSpan span);

CharSpan token_span_to_char_span(const TokenizedText& text, TokenSpan span);

// Versioned text format: header "vocab-v1", then one "token<TAB>id" line per
// id in ascending order (reserved ids included).
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace ade
