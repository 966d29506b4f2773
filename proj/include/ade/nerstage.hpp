#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/errors.hpp"
#include "ade/span.hpp"

namespace ade {

class EmptyLexicon : public Error {
 public:
  using Error::Error;
};

// Gazetteer of drug surface forms, lowercased and trimmed.
struct DrugLexicon {
  std::set<std::string> entries;  // ordered for deterministic serialization
  std::string source;
};

struct DrugMention {
  std::string surface;  // sentence casing
  CharSpan char_span;
  std::string source;  // recognizer that produced it
};

// Gazetteer from the gold drug annotations of the training sentences only.
DrugLexicon build_lexicon(const std::vector<LabeledSentence>& train_sentences);

// Stage 1 contract: a sentence with no mentions is eliminated from the
// cascade. Implementations must return non-overlapping mentions sorted by
// char_begin.
class DrugRecognizer {
 public:
  virtual ~DrugRecognizer() = default;
  virtual std::vector<DrugMention> recognize(std::string_view sentence) const = 0;
};

// Default recognizer: case-insensitive whole-token matching against the
// lexicon, left to right, longest entry first for multiword entries.
class LexiconRecognizer : public DrugRecognizer {
 public:
  explicit LexiconRecognizer(const DrugLexicon& lexicon);

  std::vector<DrugMention> recognize(std::string_view sentence) const override;

 private:
  struct Entry {
    std::vector<std::string> tokens;  // lowercased token surfaces
  };
  std::vector<Entry> entries_;
  // first lowercased token -> entry indices, longest entry first
  std::map<std::string, std::vector<std::size_t>> by_first_token_;
};

// Convenience wrapper that builds a LexiconRecognizer per call.
std::vector<DrugMention> recognize_drugs(std::string_view sentence,
                                         const DrugLexicon& lexicon);

// Versioned text format: header "lexicon-v1", one entry per line.
void save_lexicon(const DrugLexicon& lexicon, const std::string& path);
DrugLexicon load_lexicon(const std::string& path);

}  // namespace ade
