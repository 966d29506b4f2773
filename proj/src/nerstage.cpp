#include "ade/nerstage.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "ade/textproc.hpp"

namespace ade {

namespace {

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

}  // namespace

DrugLexicon build_lexicon(const std::vector<LabeledSentence>& train_sentences) {
  DrugLexicon lexicon;
  lexicon.source = "train-annotations";
  for (const auto& sentence : train_sentences) {
    for (const auto& pair : sentence.pairs) {
      std::string entry = trim(lowercase(pair.drug_surface));
      if (!entry.empty()) lexicon.entries.insert(std::move(entry));
    }
  }
  if (lexicon.entries.empty()) {
    throw EmptyLexicon("no positive training sentences to build a lexicon from");
  }
  return lexicon;
}

LexiconRecognizer::LexiconRecognizer(const DrugLexicon& lexicon) {
  if (lexicon.entries.empty()) {
    throw EmptyLexicon("lexicon recognizer needs a non-empty lexicon");
  }
  for (const auto& entry_text : lexicon.entries) {
    Entry entry;
    for (const auto& token : tokenize(entry_text).tokens) {
      entry.tokens.push_back(lowercase(token.surface));
    }
    if (entry.tokens.empty()) continue;
    entries_.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    by_first_token_[entries_[i].tokens.front()].push_back(i);
  }
  for (auto& [first, indices] : by_first_token_) {
    std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
      if (entries_[a].tokens.size() != entries_[b].tokens.size()) {
        return entries_[a].tokens.size() > entries_[b].tokens.size();
      }
      return a < b;
    });
  }
}

std::vector<DrugMention> LexiconRecognizer::recognize(
    std::string_view sentence) const {
  std::vector<DrugMention> mentions;
  TokenizedText text = tokenize(sentence);
  std::vector<std::string> lowered;
  lowered.reserve(text.tokens.size());
  for (const auto& token : text.tokens) lowered.push_back(lowercase(token.surface));

  std::size_t i = 0;
  while (i < text.tokens.size()) {
    auto it = by_first_token_.find(lowered[i]);
    std::size_t matched_len = 0;
    if (it != by_first_token_.end()) {
      for (std::size_t entry_index : it->second) {
        const auto& entry_tokens = entries_[entry_index].tokens;
        if (i + entry_tokens.size() > text.tokens.size()) continue;
        bool all_equal = true;
        for (std::size_t k = 1; k < entry_tokens.size(); ++k) {
          if (lowered[i + k] != entry_tokens[k]) {
            all_equal = false;
            break;
          }
        }
        if (all_equal) {
          matched_len = entry_tokens.size();
          break;  // entries are longest-first
        }
      }
    }
    if (matched_len > 0) {
      CharSpan span{text.tokens[i].char_begin,
                    text.tokens[i + matched_len - 1].char_end};
      mentions.push_back({std::string(sentence.substr(span.begin, span.size())),
                          span, "lexicon"});
      i += matched_len;
    } else {
      ++i;
    }
  }
  return mentions;
}

std::vector<DrugMention> recognize_drugs(std::string_view sentence,
                                         const DrugLexicon& lexicon) {
  return LexiconRecognizer(lexicon).recognize(sentence);
}

void save_lexicon(const DrugLexicon& lexicon, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw IoError("cannot write lexicon file: " + path);
  file << "lexicon-v1\n";
  for (const auto& entry : lexicon.entries) file << entry << '\n';
}

DrugLexicon load_lexicon(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open lexicon file: " + path);
  std::string line;
  if (!std::getline(file, line) || line != "lexicon-v1") {
    throw FormatError("lexicon file missing 'lexicon-v1' header: " + path);
  }
  DrugLexicon lexicon;
  lexicon.source = path;
  while (std::getline(file, line)) {
    std::string entry = trim(lowercase(line));
    if (!entry.empty()) lexicon.entries.insert(std::move(entry));
  }
  if (lexicon.entries.empty()) {
    throw EmptyLexicon("lexicon file has no entries: " + path);
  }
  return lexicon;
}

}  // namespace ade
