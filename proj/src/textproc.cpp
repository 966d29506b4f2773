#include "ade/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace ade {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

TokenizedText tokenize(std::string_view text) {
  TokenizedText out;
  out.source = std::string(text);

  auto push = [&](std::size_t begin, std::size_t end) {
    out.tokens.push_back(
        {std::string(text.substr(begin, end - begin)), begin, end});
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t chunk_end = i;
    while (chunk_end < n && !is_space(text[chunk_end])) ++chunk_end;

    std::size_t begin = i;
    while (chunk_end - begin > 1 && is_punct(text[begin])) {
      push(begin, begin + 1);
      ++begin;
    }
    std::size_t core_end = chunk_end;
    while (core_end - begin > 1 && is_punct(text[core_end - 1])) --core_end;
    push(begin, core_end);
    for (std::size_t p = core_end; p < chunk_end; ++p) push(p, p + 1);

    i = chunk_end;
  }
  return out;
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> tokens,
                                    std::size_t min_count) {
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.id_to_token_.reserve(kReservedCount + tokens.size());
  for (auto& token : tokens) {
    if (vocab.token_to_id_.count(token)) {
      throw InvariantError("duplicate vocabulary token: " + token);
    }
    int id = static_cast<int>(vocab.id_to_token_.size());
    vocab.token_to_id_.emplace(token, id);
    vocab.id_to_token_.push_back(std::move(token));
  }
  return vocab;
}

int Vocabulary::lookup(std::string_view surface) const {
  auto it = token_to_id_.find(lowercase(surface));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw IndexOutOfRange("vocabulary id " + std::to_string(id) +
                          " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

Vocabulary build_vocab(const std::vector<LabeledSentence>& sentences,
                       std::size_t min_count) {
  if (min_count < 1) {
    throw DomainError("vocabulary min_count must be >= 1");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : sentences) {
    for (const auto& token : tokenize(sentence.text).tokens) {
      ++counts[lowercase(token.surface)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> ordered;
  ordered.reserve(kept.size());
  for (auto& [token, count] : kept) ordered.push_back(std::move(token));
  return Vocabulary::from_entries(std::move(ordered), min_count);
}

std::vector<int> encode(const TokenizedText& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(text.tokens.size());
  for (const auto& token : text.tokens) {
    ids.push_back(vocab.lookup(token.surface));
  }
  return ids;
}

TokenSpan char_span_to_token_span(const TokenizedText& text, CharSpan span) {
  bool found = false;
  TokenSpan out;
  for (std::size_t i = 0; i < text.tokens.size(); ++i) {
    const Token& token = text.tokens[i];
    if (spans_overlap({token.char_begin, token.char_end}, span)) {
      if (!found) out.begin = i;
      out.end = i;
      found = true;
    }
  }
  if (!found) {
    throw NoTokenOverlap("char span [" + std::to_string(span.begin) + ", " +
                         std::to_string(span.end) + ") overlaps no token");
  }
  return out;
}

CharSpan token_span_to_char_span(const TokenizedText& text, TokenSpan span) {
  if (span.begin > span.end || span.end >= text.tokens.size()) {
    throw IndexOutOfRange("token span [" + std::to_string(span.begin) + ", " +
                          std::to_string(span.end) + "] out of range for " +
                          std::to_string(text.tokens.size()) + " tokens");
  }
  return {text.tokens[span.begin].char_begin, text.tokens[span.end].char_end};
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw IoError("cannot write vocabulary file: " + path);
  file << "vocab-v1\n";
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    file << vocab.token_of(static_cast<int>(id)) << '\t' << id << '\n';
  }
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open vocabulary file: " + path);
  std::string line;
  if (!std::getline(file, line) || line != "vocab-v1") {
    throw FormatError("vocabulary file missing 'vocab-v1' header: " + path);
  }
  std::vector<std::string> tokens;
  std::size_t expected_id = 0;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw FormatError("vocabulary line missing tab separator: " + line);
    }
    std::size_t id = 0;
    try {
      id = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("vocabulary line has a non-numeric id: " + line);
    }
    if (id != expected_id) {
      throw FormatError("vocabulary ids must be dense and ascending at id " +
                        std::to_string(id));
    }
    tokens.push_back(line.substr(0, tab));
    ++expected_id;
  }
  static const std::vector<std::string> reserved = {"<PAD>", "<UNK>", "<BOS>",
                                                    "<SEP>"};
  if (tokens.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw FormatError("vocabulary file must start with the reserved tokens");
  }
  tokens.erase(tokens.begin(), tokens.begin() + reserved.size());
  return Vocabulary::from_entries(std::move(tokens), 1);
}

}  // namespace ade
