#include "ade/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "ade/log.hpp"
#include "ade/rng.hpp"

namespace ade {

namespace {

std::size_t parse_offset(std::string_view field, std::string_view what) {
  std::size_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw OffsetParseError("offset field '" + std::string(field) + "' (" +
                           std::string(what) + ") is not a non-negative integer");
  }
  return value;
}

bool is_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string LoadStats::summary_line() const {
  std::ostringstream out;
  out << "pos=" << positives << " neg=" << negatives
      << " dedup_dropped=" << dedup_dropped
      << " offset_misses=" << offset_misses;
  return out.str();
}

PositiveRecord parse_positive_record(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t bar = line.find('|', start);
    if (bar == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, bar - start));
    start = bar + 1;
  }
  if (fields.size() != 8) {
    throw FieldCountError("expected 8 pipe-separated fields, got " +
                          std::to_string(fields.size()));
  }

  PositiveRecord record;
  record.doc_id = std::string(fields[0]);
  record.sentence = std::string(fields[1]);
  record.pair.ae_surface = std::string(fields[2]);
  record.pair.ae_doc_span = {parse_offset(fields[3], "AE begin"),
                             parse_offset(fields[4], "AE end")};
  record.pair.drug_surface = std::string(fields[5]);
  record.pair.drug_doc_span = {parse_offset(fields[6], "drug begin"),
                               parse_offset(fields[7], "drug end")};
  return record;
}

NegativeRecord parse_negative_record(std::string_view line) {
  std::size_t id_end = 0;
  while (id_end < line.size() && !is_ws(line[id_end])) ++id_end;
  std::size_t marker = id_end;
  while (marker < line.size() && is_ws(line[marker])) ++marker;
  if (id_end == 0 || marker + 3 > line.size() ||
      line.substr(marker, 3) != "NEG" ||
      (marker + 3 < line.size() && !is_ws(line[marker + 3]))) {
    throw FormatError("negative record missing '<id> NEG <sentence>' marker");
  }
  std::size_t text_begin = marker + 3;
  while (text_begin < line.size() && is_ws(line[text_begin])) ++text_begin;
  if (text_begin >= line.size()) {
    throw FormatError("negative record has an empty sentence");
  }
  NegativeRecord record;
  record.doc_id = std::string(line.substr(0, id_end));
  record.sentence = std::string(line.substr(text_begin));
  return record;
}

AnnotationPair resolve_offsets(std::string_view sentence, AnnotationPair pair) {
  auto locate = [&](const std::string& surface, std::string_view what) {
    if (surface.empty()) {
      throw SurfaceNotFound("empty " + std::string(what) + " surface");
    }
    std::size_t at = sentence.find(surface);
    if (at == std::string_view::npos) {
      throw SurfaceNotFound(std::string(what) + " surface '" + surface +
                            "' not found in sentence");
    }
    return CharSpan{at, at + surface.size()};
  };
  pair.drug_sent_span = locate(pair.drug_surface, "drug");
  pair.ae_sent_span = locate(pair.ae_surface, "adverse event");
  return pair;
}

namespace {

struct SentenceTable {
  std::vector<LabeledSentence> sentences;
  std::unordered_map<std::string, std::size_t> index_by_text;

  LabeledSentence* find(const std::string& text) {
    auto it = index_by_text.find(text);
    return it == index_by_text.end() ? nullptr : &sentences[it->second];
  }

  LabeledSentence& insert(LabeledSentence sentence) {
    index_by_text.emplace(sentence.text, sentences.size());
    sentences.push_back(std::move(sentence));
    return sentences.back();
  }
};

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

Corpus load_corpus(const std::string& pos_path, const std::string& neg_path,
                   LoadStats* stats) {
  std::ifstream pos_file(pos_path);
  if (!pos_file) throw IoError("cannot open positive file: " + pos_path);
  std::ifstream neg_file(neg_path);
  if (!neg_file) throw IoError("cannot open negative file: " + neg_path);

  LoadStats local;
  SentenceTable table;

  std::string line;
  std::size_t line_no = 0;
  auto context = [&](const std::string& path) {
    return path + ":" + std::to_string(line_no) + ": ";
  };

  while (std::getline(pos_file, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    PositiveRecord record;
    try {
      record = parse_positive_record(line);
    } catch (const FieldCountError& e) {
      throw FieldCountError(context(pos_path) + e.what());
    } catch (const OffsetParseError& e) {
      throw OffsetParseError(context(pos_path) + e.what());
    }

    AnnotationPair resolved;
    bool pair_ok = true;
    try {
      resolved = resolve_offsets(record.sentence, record.pair);
    } catch (const SurfaceNotFound& e) {
      ++local.offset_misses;
      pair_ok = false;
      log_debug(context(pos_path) + e.what());
    }

    if (LabeledSentence* existing = table.find(record.sentence)) {
      ++local.dedup_dropped;
      existing->label = Label::Positive;
      if (pair_ok) {
        auto& pairs = existing->pairs;
        if (std::find(pairs.begin(), pairs.end(), resolved) == pairs.end()) {
          pairs.push_back(resolved);
        }
      }
    } else {
      LabeledSentence sentence;
      sentence.doc_id = record.doc_id;
      sentence.text = record.sentence;
      sentence.label = Label::Positive;
      if (pair_ok) sentence.pairs.push_back(resolved);
      table.insert(std::move(sentence));
    }
  }

  line_no = 0;
  while (std::getline(neg_file, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    NegativeRecord record;
    try {
      record = parse_negative_record(line);
    } catch (const FormatError& e) {
      throw FormatError(context(neg_path) + e.what());
    }
    if (LabeledSentence* existing = table.find(record.sentence)) {
      ++local.dedup_dropped;
      if (existing->label == Label::Positive) {
        // Positives carry strictly more information; keep the positive entry.
        ++local.cross_label_dupes;
      }
      continue;
    }
    LabeledSentence sentence;
    sentence.doc_id = record.doc_id;
    sentence.text = record.sentence;
    sentence.label = Label::Negative;
    table.insert(std::move(sentence));
  }

  Corpus corpus;
  corpus.provenance = {pos_path, neg_path};
  corpus.sentences.reserve(table.sentences.size());
  for (auto& sentence : table.sentences) {
    if (sentence.label == Label::Positive && sentence.pairs.empty()) {
      // Every pair of this sentence failed offset resolution (counted above).
      log_debug("dropping positive sentence with no resolvable pair: " +
                sentence.text);
      continue;
    }
    if (sentence.label == Label::Positive) {
      ++local.positives;
    } else {
      ++local.negatives;
    }
    corpus.sentences.push_back(std::move(sentence));
  }

  log_info("loaded corpus: " + local.summary_line());
  if (stats != nullptr) *stats = local;
  return corpus;
}

namespace {

DatasetSplit split_by_counts(const std::vector<LabeledSentence>& sentences,
                             SplitCounts counts, std::uint64_t seed) {
  std::vector<std::size_t> pos_idx;
  std::vector<std::size_t> neg_idx;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    (sentences[i].label == Label::Positive ? pos_idx : neg_idx).push_back(i);
  }
  if (counts.test_positives > pos_idx.size()) {
    throw SplitError("requested " + std::to_string(counts.test_positives) +
                     " test positives, only " + std::to_string(pos_idx.size()) +
                     " available");
  }
  if (counts.test_negatives > neg_idx.size()) {
    throw SplitError("requested " + std::to_string(counts.test_negatives) +
                     " test negatives, only " + std::to_string(neg_idx.size()) +
                     " available");
  }

  Rng rng(seed);
  rng.shuffle(pos_idx);
  rng.shuffle(neg_idx);

  std::vector<bool> in_test(sentences.size(), false);
  for (std::size_t i = 0; i < counts.test_positives; ++i) in_test[pos_idx[i]] = true;
  for (std::size_t i = 0; i < counts.test_negatives; ++i) in_test[neg_idx[i]] = true;

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    (in_test[i] ? split.test : split.train).push_back(sentences[i]);
  }
  return split;
}

}  // namespace

DatasetSplit make_splits(const std::vector<LabeledSentence>& sentences,
                         SplitCounts counts, std::uint64_t seed) {
  return split_by_counts(sentences, counts, seed);
}

DatasetSplit make_splits(const std::vector<LabeledSentence>& sentences,
                         double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw SplitError("test fraction must lie strictly between 0 and 1");
  }
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (const auto& sentence : sentences) {
    (sentence.label == Label::Positive ? n_pos : n_neg) += 1;
  }
  SplitCounts counts;
  counts.test_positives =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n_pos)));
  counts.test_negatives =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n_neg)));
  return split_by_counts(sentences, counts, seed);
}

namespace {

const std::vector<std::string>& drug_names() {
  static const std::vector<std::string> names = {
      "ibuprofen",  "prednisone", "warfarin",   "aspirin",    "metformin",
      "lisinopril", "amoxicillin", "citalopram", "diazepam",   "insulin",
      "heparin",    "morphine",   "naproxen",   "omeprazole", "phenytoin",
      "quetiapine", "ramipril",   "sertraline", "tamoxifen",  "verapamil"};
  return names;
}

const std::vector<std::string>& adverse_events() {
  static const std::vector<std::string> names = {
      "rash",     "nausea",      "headache",    "dizziness", "vomiting",
      "fatigue",  "insomnia",    "vertigo",     "anemia",    "cough",
      "fever",    "tremor",      "diarrhea",    "pruritus",  "hypotension",
      "bradycardia", "seizure",  "alopecia",    "myalgia",   "confusion"};
  return names;
}

// Appends fragments while tracking the char span of marked ones.
class SentenceBuilder {
 public:
  void append(std::string_view fragment) { text_ += fragment; }

  CharSpan append_marked(std::string_view fragment) {
    CharSpan span{text_.size(), text_.size() + fragment.size()};
    text_ += fragment;
    return span;
  }

  std::string take() { return std::move(text_); }

 private:
  std::string text_;
};

struct BuiltPositive {
  std::string text;
  CharSpan drug;
  CharSpan ae;
};

BuiltPositive build_positive(std::size_t variant, const std::string& drug,
                             const std::string& ae, unsigned age) {
  SentenceBuilder b;
  BuiltPositive out;
  switch (variant % 5) {
    case 0:
      b.append("The patient developed ");
      out.ae = b.append_marked(ae);
      b.append(" after taking ");
      out.drug = b.append_marked(drug);
      b.append(".");
      break;
    case 1:
      b.append("Treatment with ");
      out.drug = b.append_marked(drug);
      b.append(" caused severe ");
      out.ae = b.append_marked(ae);
      b.append(".");
      break;
    case 2:
      b.append("A " + std::to_string(age) + "-year-old woman on ");
      out.drug = b.append_marked(drug);
      b.append(" presented with ");
      out.ae = b.append_marked(ae);
      b.append(".");
      break;
    case 3:
      b.append("He reported ");
      out.ae = b.append_marked(ae);
      b.append(" shortly after starting ");
      out.drug = b.append_marked(drug);
      b.append(".");
      break;
    default:
      out.drug = b.append_marked(drug);
      b.append(" therapy was complicated by persistent ");
      out.ae = b.append_marked(ae);
      b.append(".");
      break;
  }
  out.text = b.take();
  return out;
}

std::string build_negative(std::size_t variant, const std::string& drug,
                           unsigned number) {
  switch (variant % 6) {
    case 0:
      return "The patient tolerated " + drug + " well during the trial.";
    case 1:
      return "Serum " + drug + " levels remained stable for " +
             std::to_string(number) + " days.";
    case 2:
      return drug + " was continued at the same dose without incident.";
    case 3:
      return "No complications were observed after " + std::to_string(number) +
             " days of follow-up.";
    case 4:
      return "Routine laboratory tests were unremarkable at visit " +
             std::to_string(number) + ".";
    default:
      return "The control group received standard care for " +
             std::to_string(number) + " weeks.";
  }
}

}  // namespace

Corpus generate_synthetic_corpus(std::size_t n_pos, std::size_t n_neg,
                                 std::uint64_t seed) {
  Corpus corpus;
  corpus.provenance = {"synthetic:" + std::to_string(n_pos) + "," +
                       std::to_string(n_neg) + ",seed=" + std::to_string(seed)};
  Rng rng(seed);
  std::unordered_map<std::string, bool> used;

  const auto& drugs = drug_names();
  const auto& events = adverse_events();

  for (std::size_t i = 0; i < n_pos; ++i) {
    BuiltPositive built;
    for (int attempt = 0; attempt < 200; ++attempt) {
      std::size_t variant = rng.below(5);
      const std::string& drug = drugs[rng.below(drugs.size())];
      const std::string& ae = events[rng.below(events.size())];
      unsigned age = 18 + static_cast<unsigned>(rng.below(73));
      built = build_positive(variant, drug, ae, age);
      if (!used.count(built.text)) break;
      built.text.clear();
    }
    if (built.text.empty() || used.count(built.text)) {
      // Template space exhausted; salt with a distinct trailing clause.
      built = build_positive(0, drugs[i % drugs.size()],
                             events[i % events.size()], 18);
      built.text += " Case " + std::to_string(i) + " was recorded.";
    }
    used.emplace(built.text, true);

    LabeledSentence sentence;
    sentence.doc_id = "syn-pos-" + std::to_string(i);
    sentence.label = Label::Positive;
    AnnotationPair pair;
    pair.drug_surface = built.text.substr(built.drug.begin, built.drug.size());
    pair.ae_surface = built.text.substr(built.ae.begin, built.ae.size());
    pair.drug_doc_span = built.drug;
    pair.ae_doc_span = built.ae;
    pair.drug_sent_span = built.drug;
    pair.ae_sent_span = built.ae;
    sentence.text = std::move(built.text);
    sentence.pairs.push_back(std::move(pair));
    corpus.sentences.push_back(std::move(sentence));
  }

  for (std::size_t i = 0; i < n_neg; ++i) {
    std::string text;
    for (int attempt = 0; attempt < 200; ++attempt) {
      std::size_t variant = rng.below(6);
      const std::string& drug = drugs[rng.below(drugs.size())];
      unsigned number = 1 + static_cast<unsigned>(rng.below(900));
      text = build_negative(variant, drug, number);
      if (!used.count(text)) break;
      text.clear();
    }
    if (text.empty() || used.count(text)) {
      text = build_negative(0, drugs[i % drugs.size()], 0) + " Case " +
             std::to_string(i) + " was recorded.";
    }
    used.emplace(text, true);

    LabeledSentence sentence;
    sentence.doc_id = "syn-neg-" + std::to_string(i);
    sentence.label = Label::Negative;
    sentence.text = std::move(text);
    corpus.sentences.push_back(std::move(sentence));
  }

  return corpus;
}

void write_corpus_files(const std::vector<LabeledSentence>& sentences,
                        const std::string& pos_path,
                        const std::string& neg_path) {
  std::ofstream pos_file(pos_path);
  if (!pos_file) throw IoError("cannot write positive file: " + pos_path);
  std::ofstream neg_file(neg_path);
  if (!neg_file) throw IoError("cannot write negative file: " + neg_path);

  for (const auto& sentence : sentences) {
    if (sentence.label == Label::Positive) {
      for (const auto& pair : sentence.pairs) {
        pos_file << sentence.doc_id << '|' << sentence.text << '|'
                 << pair.ae_surface << '|' << pair.ae_doc_span.begin << '|'
                 << pair.ae_doc_span.end << '|' << pair.drug_surface << '|'
                 << pair.drug_doc_span.begin << '|' << pair.drug_doc_span.end
                 << '\n';
      }
    } else {
      neg_file << sentence.doc_id << " NEG " << sentence.text << '\n';
    }
  }
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_map<std::string, bool> seen;
  for (const auto& sentence : corpus.sentences) {
    if (sentence.text.empty()) {
      throw InvariantError("sentence with empty text: " + sentence.doc_id);
    }
    if (seen.count(sentence.text)) {
      throw InvariantError("duplicate sentence text: " + sentence.text);
    }
    seen.emplace(sentence.text, true);
    const bool positive = sentence.label == Label::Positive;
    if (positive != !sentence.pairs.empty()) {
      throw InvariantError("label/pair mismatch for sentence: " + sentence.text);
    }
    for (const auto& pair : sentence.pairs) {
      auto check_span = [&](CharSpan span, const std::string& surface,
                            const char* what) {
        if (span.begin >= span.end || span.end > sentence.text.size() ||
            sentence.text.substr(span.begin, span.size()) != surface) {
          throw InvariantError(std::string("resolved ") + what +
                               " span does not slice to its surface in: " +
                               sentence.text);
        }
      };
      check_span(pair.drug_sent_span, pair.drug_surface, "drug");
      check_span(pair.ae_sent_span, pair.ae_surface, "adverse event");
    }
  }
}

}  // namespace ade
