#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/errors.hpp"
#include "ade/span.hpp"

namespace ade {

class InconsistentTrace : public Error {
 public:
  using Error::Error;
};

class KTooLarge : public Error {
 public:
  using Error::Error;
};

class KTooSmall : public Error {
 public:
  using Error::Error;
};

struct ConfusionCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
};

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); a zero denominator
// anywhere yields 0 for that score.
PrfScores prf_scores(const ConfusionCounts& counts);

enum class MatchCriterion { Exact, Overlap };

// Exact: the predicted span equals some gold span. Overlap: it shares at
// least one character with some gold span. Empty gold set never matches.
bool span_match(CharSpan predicted, std::span<const CharSpan> gold,
                MatchCriterion criterion);

// The seven per-sentence cascade outcomes: D = drug found, C = passed the
// relevance classifier, A = answer matched a gold adverse-event span.
enum class OutcomeCategory {
  PosNoDrug = 0,         // S_pos[-D]
  PosFiltered,           // S_pos[+D,-C]
  PosAnsweredCorrect,    // S_pos[+D,+C,+A]
  PosAnsweredWrong,      // S_pos[+D,+C,-A]
  NegNoDrug,             // S_neg[-D]
  NegFiltered,           // S_neg[+D,-C]
  NegAnswered,           // S_neg[+D,+C,-A]
};

inline constexpr std::size_t kOutcomeCategoryCount = 7;

// The S_pos/S_neg notation, kept verbatim for report traceability.
std::string_view outcome_category_name(OutcomeCategory category);

struct CascadeTally {
  std::array<long long, kOutcomeCategoryCount> counts{};

  void add(OutcomeCategory category) {
    counts[static_cast<std::size_t>(category)] += 1;
  }
  long long of(OutcomeCategory category) const {
    return counts[static_cast<std::size_t>(category)];
  }
  long long total() const;

  CascadeTally& operator+=(const CascadeTally& other);
};

// Maps a per-sentence cascade trace to its unique category. answered_correct
// must be present exactly when the sentence reached the QA stage (drug found
// and classifier passed); negatives reaching QA are always wrong, so for
// them the flag may be absent or false but never true.
OutcomeCategory categorize_sentence(Label label, bool drug_found,
                                    bool passed_classifier,
                                    std::optional<bool> answered_correct);

// TP = S_neg[-D] + S_neg[+D,-C] + S_pos[+D,+C,+A]
// FN = S_pos[-D] + S_pos[+D,-C]
// FP = S_pos[+D,+C,-A] + S_neg[+D,+C,-A]
// There is no TN cell: correctly removed negatives count toward TP.
ConfusionCounts cascade_confusion(const CascadeTally& tally);

struct FoldAssignment {
  std::vector<int> fold_of;  // per-example fold index in 0..k-1
  int k = 0;
  std::uint64_t seed = 0;
};

// Deterministic stratified assignment: per class, a seeded shuffle followed
// by round-robin dealing, so per-fold class counts deviate at most 1 from
// the proportional share. Requires k >= 2 and every class size >= k.
FoldAssignment stratified_kfold(std::span<const int> labels, int k,
                                std::uint64_t seed);

}  // namespace ade
