#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "ade/corpus.hpp"
#include "testutil.hpp"

using namespace ade;
using ade::testing::TempDir;
using ade::testing::write_file;

namespace {

const char* kSentence = "He took ibuprofen and developed rash.";

}  // namespace

TEST_CASE("parse_positive_record splits the eight pipe fields") {
  auto record = parse_positive_record(
      "1|He took ibuprofen and developed rash.|rash|32|36|ibuprofen|8|17");
  CHECK(record.doc_id == "1");
  CHECK(record.sentence == kSentence);
  CHECK(record.pair.drug_surface == "ibuprofen");
  CHECK(record.pair.ae_surface == "rash");
  CHECK(record.pair.ae_doc_span == CharSpan{32, 36});
  CHECK(record.pair.drug_doc_span == CharSpan{8, 17});
  // Substring-extraction oracle: here the document is the sentence itself,
  // so the doc offsets must slice to the surfaces.
  CHECK(record.sentence.substr(32, 36 - 32) == "rash");
  CHECK(record.sentence.substr(8, 17 - 8) == "ibuprofen");
}

TEST_CASE("parse_positive_record rejects malformed lines") {
  CHECK_THROWS_AS(parse_positive_record("1|text only"), FieldCountError);
  CHECK_THROWS_AS(parse_positive_record("1|s|a|x|5|d|0|1"), OffsetParseError);
  CHECK_THROWS_AS(parse_positive_record("1|s|a|1|5|d|0|1|extra"),
                  FieldCountError);
  CHECK_THROWS_AS(parse_positive_record("1|s|a|1|5|d|-2|1"), OffsetParseError);
}

TEST_CASE("parse_negative_record captures the sentence verbatim") {
  auto record = parse_negative_record("7 NEG No thrombus was observed.");
  CHECK(record.doc_id == "7");
  CHECK(record.sentence == "No thrombus was observed.");

  CHECK_THROWS_AS(parse_negative_record("7 No thrombus."), FormatError);
  CHECK_THROWS_AS(parse_negative_record("7 NEGATIVE thrombus."), FormatError);
  CHECK_THROWS_AS(parse_negative_record("7 NEG "), FormatError);

  // Inner whitespace survives; the separator run after NEG does not.
  auto spaced = parse_negative_record("7 NEG  a  b");
  CHECK(spaced.sentence == "a  b");
  CHECK(("7 NEG  " + spaced.sentence).find("a  b") != std::string::npos);
}

TEST_CASE("resolve_offsets recovers sentence-level spans by first occurrence") {
  AnnotationPair pair;
  pair.drug_surface = "ibuprofen";
  pair.ae_surface = "rash";
  auto resolved = resolve_offsets(kSentence, pair);
  CHECK(resolved.drug_sent_span == CharSpan{8, 17});
  CHECK(resolved.ae_sent_span == CharSpan{32, 36});
  CHECK(std::string(kSentence).substr(resolved.drug_sent_span.begin,
                                      resolved.drug_sent_span.size()) ==
        "ibuprofen");

  SUBCASE("first occurrence wins for repeated surfaces") {
    std::string twice = "aspirin then aspirin again caused rash.";
    AnnotationPair p;
    p.drug_surface = "aspirin";
    p.ae_surface = "rash";
    auto r = resolve_offsets(twice, p);
    // Oracle: enumerate every occurrence and keep the smallest offset.
    std::vector<std::size_t> occurrences;
    for (std::size_t at = twice.find("aspirin"); at != std::string::npos;
         at = twice.find("aspirin", at + 1)) {
      occurrences.push_back(at);
    }
    CHECK(occurrences.size() == 2);
    CHECK(r.drug_sent_span.begin == *std::min_element(occurrences.begin(),
                                                      occurrences.end()));
  }

  SUBCASE("absent surface raises SurfaceNotFound") {
    AnnotationPair p;
    p.drug_surface = "ibuprofen";
    p.ae_surface = "vertigo";
    CHECK_THROWS_AS(resolve_offsets(kSentence, p), SurfaceNotFound);
  }

  SUBCASE("search is case-sensitive") {
    AnnotationPair p;
    p.drug_surface = "Ibuprofen";
    p.ae_surface = "rash";
    CHECK_THROWS_AS(resolve_offsets(kSentence, p), SurfaceNotFound);
  }
}

TEST_CASE("load_corpus deduplicates and merges pairs") {
  TempDir tmp;
  write_file(tmp.file("pos.txt"),
             "1|He took ibuprofen and developed rash.|rash|32|36|ibuprofen|8|17\n"
             "1|He took ibuprofen and developed rash.|developed|22|31|ibuprofen|8|17\n"
             "2|Treatment with aspirin caused nausea.|nausea|30|36|aspirin|15|22\n");
  write_file(tmp.file("neg.txt"),
             "7 NEG No thrombus was observed.\n"
             "7 NEG No thrombus was observed.\n"
             "8 NEG He took ibuprofen and developed rash.\n");

  LoadStats stats;
  Corpus corpus = load_corpus(tmp.file("pos.txt"), tmp.file("neg.txt"), &stats);
  validate_corpus(corpus);

  CHECK(stats.positives == 2);
  CHECK(stats.negatives == 1);
  CHECK(stats.dedup_dropped == 3);  // dup positive line, dup negative, cross-label
  CHECK(stats.cross_label_dupes == 1);
  CHECK(stats.offset_misses == 0);
  CHECK(stats.summary_line() ==
        "pos=2 neg=1 dedup_dropped=3 offset_misses=0");

  auto ibuprofen = std::find_if(
      corpus.sentences.begin(), corpus.sentences.end(),
      [](const LabeledSentence& s) { return s.doc_id == "1"; });
  REQUIRE(ibuprofen != corpus.sentences.end());
  CHECK(ibuprofen->label == Label::Positive);
  CHECK(ibuprofen->pairs.size() == 2);
}

TEST_CASE("load_corpus resolves spans by surface, not by document offsets") {
  // Offsets in the source files count from the start of the abstract, so
  // they routinely point past the sentence; only the surfaces are trusted.
  TempDir tmp;
  write_file(tmp.file("pos.txt"),
             "9|He took ibuprofen and developed rash.|rash|1232|1236|ibuprofen|1208|1217\n");
  write_file(tmp.file("neg.txt"), "");
  LoadStats stats;
  Corpus corpus = load_corpus(tmp.file("pos.txt"), tmp.file("neg.txt"), &stats);
  REQUIRE(corpus.sentences.size() == 1);
  CHECK(stats.offset_misses == 0);
  const AnnotationPair& pair = corpus.sentences[0].pairs.at(0);
  CHECK(pair.drug_sent_span == CharSpan{8, 17});
  CHECK(pair.ae_sent_span == CharSpan{32, 36});
  CHECK(pair.drug_doc_span == CharSpan{1208, 1217});  // kept verbatim
  CHECK(pair.ae_doc_span == CharSpan{1232, 1236});
  validate_corpus(corpus);
}

TEST_CASE("load_corpus handles empty files and counts offset misses") {
  TempDir tmp;
  SUBCASE("empty files give an empty corpus") {
    write_file(tmp.file("pos.txt"), "");
    write_file(tmp.file("neg.txt"), "");
    LoadStats stats;
    Corpus corpus = load_corpus(tmp.file("pos.txt"), tmp.file("neg.txt"), &stats);
    CHECK(corpus.sentences.empty());
    CHECK(stats.positives == 0);
    CHECK(stats.negatives == 0);
  }

  SUBCASE("a pair whose surface is absent is dropped and counted") {
    write_file(tmp.file("pos.txt"),
               "1|No mention of the annotated drug here.|vertigo|0|7|warfarin|8|16\n"
               "2|Treatment with aspirin caused nausea.|nausea|30|36|aspirin|15|22\n");
    write_file(tmp.file("neg.txt"), "");
    LoadStats stats;
    Corpus corpus = load_corpus(tmp.file("pos.txt"), tmp.file("neg.txt"), &stats);
    CHECK(stats.offset_misses == 1);
    CHECK(stats.positives == 1);  // sentence 1 lost its only pair
    CHECK(corpus.sentences.size() == 1);
  }

  SUBCASE("parse errors abort with the line number") {
    write_file(tmp.file("pos.txt"),
               "2|Treatment with aspirin caused nausea.|nausea|30|36|aspirin|15|22\n"
               "1|bad line\n");
    write_file(tmp.file("neg.txt"), "");
    CHECK_THROWS_WITH_AS(load_corpus(tmp.file("pos.txt"), tmp.file("neg.txt")),
                         doctest::Contains(":2:"), FieldCountError);
  }

  SUBCASE("missing file raises IoError") {
    write_file(tmp.file("neg.txt"), "");
    CHECK_THROWS_AS(load_corpus(tmp.file("absent.txt"), tmp.file("neg.txt")),
                    IoError);
  }
}

TEST_CASE("make_splits partitions deterministically") {
  Corpus corpus = generate_synthetic_corpus(5, 5, 11);
  const auto& sentences = corpus.sentences;

  SUBCASE("explicit counts: 10 sentences, test count 3") {
    DatasetSplit split = make_splits(sentences, SplitCounts{2, 1}, 3);
    CHECK(split.train.size() == 7);
    CHECK(split.test.size() == 3);
    // Exhaustive membership: every input sentence lands in exactly one side.
    std::set<std::string> train_texts, test_texts;
    for (const auto& s : split.train) train_texts.insert(s.text);
    for (const auto& s : split.test) test_texts.insert(s.text);
    for (const auto& s : sentences) {
      CHECK(train_texts.count(s.text) + test_texts.count(s.text) == 1);
    }
  }

  SUBCASE("same seed twice gives identical membership") {
    DatasetSplit a = make_splits(sentences, SplitCounts{2, 2}, 9);
    DatasetSplit b = make_splits(sentences, SplitCounts{2, 2}, 9);
    REQUIRE(a.test.size() == b.test.size());
    for (std::size_t i = 0; i < a.test.size(); ++i) {
      CHECK(a.test[i].text == b.test[i].text);
    }
  }

  SUBCASE("partition property over 100 seeds") {
    std::multiset<std::string> input_texts;
    for (const auto& s : sentences) input_texts.insert(s.text);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      DatasetSplit split = make_splits(sentences, SplitCounts{3, 2}, seed);
      std::multiset<std::string> reunion;
      for (const auto& s : split.train) reunion.insert(s.text);
      for (const auto& s : split.test) reunion.insert(s.text);
      CHECK(reunion == input_texts);
    }
  }

  SUBCASE("requested count beyond availability") {
    CHECK_THROWS_AS(make_splits(sentences, SplitCounts{6, 0}, 1), SplitError);
  }

  SUBCASE("fraction must be in (0, 1)") {
    CHECK_THROWS_AS(make_splits(sentences, 0.0, 1), SplitError);
    CHECK_THROWS_AS(make_splits(sentences, 1.0, 1), SplitError);
  }
}

TEST_CASE("make_splits reproduces the classifier split shape") {
  // Same arithmetic as the reference corpus subsample: 4586 positives and
  // 6617 negatives, of which 610 / 662 are held out.
  Corpus corpus = generate_synthetic_corpus(4586, 6617, 5);
  DatasetSplit split = make_splits(corpus.sentences, SplitCounts{610, 662}, 5);
  std::size_t train_pos = 0, train_neg = 0, test_pos = 0, test_neg = 0;
  for (const auto& s : split.train) {
    (s.label == Label::Positive ? train_pos : train_neg) += 1;
  }
  for (const auto& s : split.test) {
    (s.label == Label::Positive ? test_pos : test_neg) += 1;
  }
  CHECK(train_pos == 3976);
  CHECK(train_neg == 5955);
  CHECK(test_pos == 610);
  CHECK(test_neg == 662);
  CHECK(split.train.size() == 9931);
  CHECK(split.test.size() == 1272);
}

TEST_CASE("generate_synthetic_corpus is valid and deterministic") {
  Corpus corpus = generate_synthetic_corpus(5, 5, 7);
  CHECK(corpus.sentences.size() == 10);
  validate_corpus(corpus);

  std::size_t with_pairs = 0;
  for (const auto& s : corpus.sentences) {
    if (!s.pairs.empty()) ++with_pairs;
  }
  CHECK(with_pairs == 5);

  SUBCASE("empty request") {
    Corpus empty = generate_synthetic_corpus(0, 0, 1);
    CHECK(empty.sentences.empty());
  }

  SUBCASE("same seed reproduces every byte") {
    Corpus again = generate_synthetic_corpus(5, 5, 7);
    REQUIRE(again.sentences.size() == corpus.sentences.size());
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
      CHECK(corpus.sentences[i].text == again.sentences[i].text);
      CHECK(corpus.sentences[i].pairs == again.sentences[i].pairs);
    }
  }

  SUBCASE("different seeds differ") {
    Corpus other = generate_synthetic_corpus(5, 5, 8);
    bool any_difference = false;
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
      if (other.sentences[i].text != corpus.sentences[i].text) {
        any_difference = true;
      }
    }
    CHECK(any_difference);
  }
}

TEST_CASE("write_corpus_files round-trips through load_corpus") {
  TempDir tmp;
  Corpus corpus = generate_synthetic_corpus(8, 6, 21);
  write_corpus_files(corpus.sentences, tmp.file("pos.txt"), tmp.file("neg.txt"));

  LoadStats stats;
  Corpus reloaded = load_corpus(tmp.file("pos.txt"), tmp.file("neg.txt"), &stats);
  validate_corpus(reloaded);
  CHECK(stats.positives == 8);
  CHECK(stats.negatives == 6);
  CHECK(stats.offset_misses == 0);

  std::map<std::string, const LabeledSentence*> by_text;
  for (const auto& s : corpus.sentences) by_text[s.text] = &s;
  for (const auto& s : reloaded.sentences) {
    REQUIRE(by_text.count(s.text) == 1);
    const LabeledSentence& original = *by_text[s.text];
    CHECK(s.label == original.label);
    REQUIRE(s.pairs.size() == original.pairs.size());
    for (std::size_t i = 0; i < s.pairs.size(); ++i) {
      CHECK(s.pairs[i].drug_surface == original.pairs[i].drug_surface);
      CHECK(s.pairs[i].ae_sent_span == original.pairs[i].ae_sent_span);
    }
  }
}
