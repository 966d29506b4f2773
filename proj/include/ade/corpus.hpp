#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ade/errors.hpp"
#include "ade/span.hpp"

namespace ade {

enum class Label { Negative = 0, Positive = 1 };

class FieldCountError : public FormatError {
 public:
  using FormatError::FormatError;
};

class OffsetParseError : public FormatError {
 public:
  using FormatError::FormatError;
};

class SurfaceNotFound : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

// One annotated (drug, adverse event) pair. The source corpus counts offsets
// within the whole abstract, so *_doc_span is kept verbatim for provenance
// and *_sent_span is recovered against the sentence text (resolve_offsets).
struct AnnotationPair {
  std::string drug_surface;
  CharSpan drug_doc_span;
  std::string ae_surface;
  CharSpan ae_doc_span;
  CharSpan drug_sent_span;
  CharSpan ae_sent_span;

  friend bool operator==(const AnnotationPair&, const AnnotationPair&) = default;
};

struct LabeledSentence {
  std::string doc_id;
  std::string text;
  Label label = Label::Negative;
  std::vector<AnnotationPair> pairs;  // non-empty iff Positive
};

struct Corpus {
  std::vector<LabeledSentence> sentences;  // unique by exact text
  std::vector<std::string> provenance;
};

struct LoadStats {
  std::size_t positives = 0;        // unique positive sentences kept
  std::size_t negatives = 0;        // unique negative sentences kept
  std::size_t dedup_dropped = 0;    // records whose text was already present
  std::size_t offset_misses = 0;    // pairs whose surfaces were absent from the sentence
  std::size_t cross_label_dupes = 0;  // negative records shadowed by a positive

  std::string summary_line() const;
};

struct DatasetSplit {
  std::vector<LabeledSentence> train;
  std::vector<LabeledSentence> test;
  std::uint64_t seed = 0;
};

struct PositiveRecord {
  std::string doc_id;
  std::string sentence;
  AnnotationPair pair;  // doc-level spans only; sentence spans unresolved
};

struct NegativeRecord {
  std::string doc_id;
  std::string sentence;
};

// Line layout: id|sentence|AE|AE_begin|AE_end|drug|drug_begin|drug_end.
// Surfaces are preserved verbatim; offsets must parse as base-10 integers.
PositiveRecord parse_positive_record(std::string_view line);

// Line layout: "<id> NEG <sentence>". Whitespace after the NEG marker is
// consumed as a separator; whitespace inside the sentence is preserved.
NegativeRecord parse_negative_record(std::string_view line);

// Recovers sentence-level spans by case-sensitive substring search, first
// occurrence wins. Throws SurfaceNotFound when a surface is absent.
AnnotationPair resolve_offsets(std::string_view sentence, AnnotationPair pair);

// Parses both files, resolves offsets, deduplicates by exact sentence text
// and merges pairs of repeated sentences. Record-level parse errors abort
// with the file path and line number in the message. Pairs whose surfaces
// cannot be found in their sentence are dropped and counted as offset
// misses; a positive sentence left with no resolvable pair is dropped too.
// A sentence present in both files stays Positive (warning counted).
Corpus load_corpus(const std::string& pos_path, const std::string& neg_path,
                   LoadStats* stats = nullptr);

struct SplitCounts {
  std::size_t test_positives = 0;
  std::size_t test_negatives = 0;
};

// Deterministic per-class partition: exactly the requested number of test
// sentences per class, the rest in train. Train and test preserve input
// order. Throws SplitError when a requested count exceeds the class size.
DatasetSplit make_splits(const std::vector<LabeledSentence>& sentences,
                         SplitCounts counts, std::uint64_t seed);

// Fraction form: per-class test count = round(fraction * class size).
// Requires 0 < test_fraction < 1.
DatasetSplit make_splits(const std::vector<LabeledSentence>& sentences,
                         double test_fraction, std::uint64_t seed);

// Desk-scale fixture corpus: templated sentences with known drug/AE spans,
// unique texts, deterministic for a given seed. Positive sentences carry one
// resolved pair; half of the negatives mention a drug with no adverse event.
Corpus generate_synthetic_corpus(std::size_t n_pos, std::size_t n_neg,
                                 std::uint64_t seed);

// Writes sentences back out in the loader's two-file layout (one positive
// line per pair, doc-level spans). load_corpus on the result reproduces the
// sentences, which makes fixtures round-trippable.
void write_corpus_files(const std::vector<LabeledSentence>& sentences,
                        const std::string& pos_path,
                        const std::string& neg_path);

// Checks every documented corpus invariant (uniqueness, label/pair
// consistency, slice equality of resolved spans). Throws InvariantError.
void validate_corpus(const Corpus& corpus);

}  // namespace ade
