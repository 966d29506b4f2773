#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "ade/corpus.hpp"
#include "ade/rng.hpp"
#include "ade/textproc.hpp"
#include "testutil.hpp"

using namespace ade;
using ade::testing::TempDir;

namespace {

const char* kSentence = "He took ibuprofen and developed rash.";

}  // namespace

TEST_CASE("tokenize detaches edge punctuation and keeps offsets") {
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize("   \t\n ").tokens.empty());

  TokenizedText text = tokenize(kSentence);
  // Hand tokenization oracle: He | took | ibuprofen | and | developed |
  // rash | .
  REQUIRE(text.tokens.size() == 7);
  CHECK(text.tokens[0].surface == "He");
  CHECK(text.tokens[5].surface == "rash");
  CHECK(text.tokens[5].char_begin == 32);
  CHECK(text.tokens[5].char_end == 36);
  CHECK(text.tokens[6].surface == ".");
  CHECK(text.tokens[6].char_begin == 36);

  SUBCASE("every token slices back to its surface") {
    for (const auto& token : text.tokens) {
      CHECK(text.source.substr(token.char_begin,
                               token.char_end - token.char_begin) ==
            token.surface);
    }
  }

  SUBCASE("interior punctuation stays attached") {
    TokenizedText hyphen = tokenize("A 14-year-old woman (on prednisone).");
    std::vector<std::string> surfaces;
    for (const auto& t : hyphen.tokens) surfaces.push_back(t.surface);
    CHECK(surfaces == std::vector<std::string>{"A", "14-year-old", "woman", "(",
                                               "on", "prednisone", ")", "."});
  }
}

TEST_CASE("tokenize offset fidelity reconstructs the source") {
  Corpus corpus = generate_synthetic_corpus(20, 20, 3);
  for (const auto& sentence : corpus.sentences) {
    TokenizedText text = tokenize(sentence.text);
    // Rebuild the source from token spans plus the gaps between them.
    std::string rebuilt;
    std::size_t cursor = 0;
    for (const auto& token : text.tokens) {
      rebuilt += sentence.text.substr(cursor, token.char_begin - cursor);
      rebuilt += token.surface;
      cursor = token.char_end;
    }
    rebuilt += sentence.text.substr(cursor);
    CHECK(rebuilt == sentence.text);
  }
}

TEST_CASE("tokenize is idempotent on its own token surfaces") {
  Corpus corpus = generate_synthetic_corpus(10, 10, 5);
  for (const auto& sentence : corpus.sentences) {
    for (const auto& token : tokenize(sentence.text).tokens) {
      TokenizedText again = tokenize(token.surface);
      REQUIRE(again.tokens.size() == 1);
      CHECK(again.tokens[0].surface == token.surface);
      CHECK(again.tokens[0].char_begin == 0);
      CHECK(again.tokens[0].char_end == token.surface.size());
    }
  }
}

TEST_CASE("build_vocab keeps frequent tokens and maps the rest to UNK") {
  std::vector<LabeledSentence> sentences(1);
  sentences[0].text = "The drug caused the rash.";
  sentences[0].label = Label::Negative;

  SUBCASE("min_count=1 keeps every distinct lowercased token") {
    Vocabulary vocab = build_vocab(sentences, 1);
    // the, drug, caused, rash, "." -> 5 distinct lowercased tokens.
    CHECK(vocab.size() == Vocabulary::kReservedCount + 5);
    CHECK(vocab.lookup("The") == vocab.lookup("the"));
    CHECK(vocab.lookup("rash") >= static_cast<int>(Vocabulary::kReservedCount));
  }

  SUBCASE("min_count=2 drops singletons") {
    Vocabulary vocab = build_vocab(sentences, 2);
    // Frequency oracle: only "the" appears twice.
    std::map<std::string, int> counts;
    for (const auto& t : tokenize(sentences[0].text).tokens) {
      counts[lowercase(t.surface)] += 1;
    }
    std::size_t expected = 0;
    for (const auto& [token, count] : counts) {
      if (count >= 2) ++expected;
    }
    CHECK(expected == 1);
    CHECK(vocab.size() == Vocabulary::kReservedCount + expected);
    CHECK(vocab.lookup("drug") == Vocabulary::kUnk);
    CHECK(vocab.lookup("the") != Vocabulary::kUnk);
  }

  SUBCASE("unseen token maps to UNK id 1") {
    Vocabulary vocab = build_vocab(sentences, 1);
    CHECK(vocab.lookup("warfarin") == 1);
    CHECK(vocab.lookup("warfarin") == Vocabulary::kUnk);
  }

  SUBCASE("reserved ids are stable") {
    Vocabulary vocab = build_vocab(sentences, 1);
    CHECK(vocab.token_of(0) == "<PAD>");
    CHECK(vocab.token_of(1) == "<UNK>");
    CHECK(vocab.token_of(2) == "<BOS>");
    CHECK(vocab.token_of(3) == "<SEP>");
  }
}

TEST_CASE("char and token span conversions") {
  TokenizedText text = tokenize(kSentence);

  SUBCASE("known answer span") {
    TokenSpan span = char_span_to_token_span(text, {32, 36});
    CHECK(span == TokenSpan{5, 5});
    CHECK(token_span_to_char_span(text, span) == CharSpan{32, 36});
  }

  SUBCASE("full sentence span covers all tokens") {
    TokenSpan span = char_span_to_token_span(text, {0, text.source.size()});
    CHECK(span.begin == 0);
    CHECK(span.end == text.tokens.size() - 1);
  }

  SUBCASE("span inside inter-token whitespace overlaps nothing") {
    // The gap between "He" (0,2) and "took" (3,7) is [2,3).
    CHECK_THROWS_AS(char_span_to_token_span(text, {2, 3}), NoTokenOverlap);
  }

  SUBCASE("token span bounds are checked") {
    CHECK_THROWS_AS(token_span_to_char_span(text, {0, text.tokens.size()}),
                    IndexOutOfRange);
    CHECK_THROWS_AS(token_span_to_char_span(text, {3, 2}), IndexOutOfRange);
  }

  SUBCASE("round trip contains the original span") {
    Corpus corpus = generate_synthetic_corpus(15, 0, 9);
    Rng rng(17);
    for (const auto& sentence : corpus.sentences) {
      TokenizedText tt = tokenize(sentence.text);
      for (const auto& pair : sentence.pairs) {
        TokenSpan ts = char_span_to_token_span(tt, pair.ae_sent_span);
        CharSpan back = token_span_to_char_span(tt, ts);
        CHECK(back.begin <= pair.ae_sent_span.begin);
        CHECK(back.end >= pair.ae_sent_span.end);
      }
      // And for random in-token spans.
      for (int i = 0; i < 5; ++i) {
        std::size_t begin = rng.below(sentence.text.size());
        std::size_t end = begin + 1 + rng.below(sentence.text.size() - begin);
        try {
          TokenSpan ts = char_span_to_token_span(tt, {begin, end});
          CharSpan back = token_span_to_char_span(tt, ts);
          // Tokens that overlap [begin,end) are inside [back.begin, back.end).
          CHECK(back.begin < end);
          CHECK(back.end > begin);
        } catch (const NoTokenOverlap&) {
          // pure-whitespace span; fine
        }
      }
    }
  }
}

TEST_CASE("vocabulary file round trip") {
  TempDir tmp;
  std::vector<LabeledSentence> sentences(1);
  sentences[0].text = "Treatment with warfarin caused rash.";
  sentences[0].label = Label::Negative;
  Vocabulary vocab = build_vocab(sentences, 1);

  save_vocabulary(vocab, tmp.file("vocab.tsv"));
  std::string content = ade::testing::read_file(tmp.file("vocab.tsv"));
  CHECK(content.rfind("vocab-v1\n", 0) == 0);
  CHECK(content.find("<PAD>\t0\n") != std::string::npos);

  Vocabulary reloaded = load_vocabulary(tmp.file("vocab.tsv"));
  CHECK(reloaded.size() == vocab.size());
  CHECK(reloaded.lookup("warfarin") == vocab.lookup("warfarin"));
  CHECK(reloaded.lookup("unseen-token") == Vocabulary::kUnk);

  SUBCASE("bad header is rejected") {
    ade::testing::write_file(tmp.file("bad.tsv"), "vocab-v2\nfoo\t0\n");
    CHECK_THROWS_AS(load_vocabulary(tmp.file("bad.tsv")), FormatError);
  }
}
