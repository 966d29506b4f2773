#include "ade/evalx.hpp"

#include <map>
#include <numeric>
#include <string>

#include "ade/rng.hpp"

namespace ade {

PrfScores prf_scores(const ConfusionCounts& counts) {
  PrfScores scores;
  const double tp = static_cast<double>(counts.tp);
  if (counts.tp + counts.fp > 0) {
    scores.precision = tp / static_cast<double>(counts.tp + counts.fp);
  }
  if (counts.tp + counts.fn > 0) {
    scores.recall = tp / static_cast<double>(counts.tp + counts.fn);
  }
  if (scores.precision + scores.recall > 0.0) {
    scores.f1 = 2.0 * scores.precision * scores.recall /
                (scores.precision + scores.recall);
  }
  return scores;
}

bool span_match(CharSpan predicted, std::span<const CharSpan> gold,
                MatchCriterion criterion) {
  for (CharSpan g : gold) {
    if (criterion == MatchCriterion::Exact ? predicted == g
                                           : spans_overlap(predicted, g)) {
      return true;
    }
  }
  return false;
}

std::string_view outcome_category_name(OutcomeCategory category) {
  switch (category) {
    case OutcomeCategory::PosNoDrug: return "S_pos[-D]";
    case OutcomeCategory::PosFiltered: return "S_pos[+D,-C]";
    case OutcomeCategory::PosAnsweredCorrect: return "S_pos[+D,+C,+A]";
    case OutcomeCategory::PosAnsweredWrong: return "S_pos[+D,+C,-A]";
    case OutcomeCategory::NegNoDrug: return "S_neg[-D]";
    case OutcomeCategory::NegFiltered: return "S_neg[+D,-C]";
    case OutcomeCategory::NegAnswered: return "S_neg[+D,+C,-A]";
  }
  throw InvariantError("unknown outcome category");
}

long long CascadeTally::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

CascadeTally& CascadeTally::operator+=(const CascadeTally& other) {
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

OutcomeCategory categorize_sentence(Label label, bool drug_found,
                                    bool passed_classifier,
                                    std::optional<bool> answered_correct) {
  if (passed_classifier && !drug_found) {
    throw InconsistentTrace("classifier verdict without a drug mention");
  }
  const bool reached_qa = drug_found && passed_classifier;
  if (!reached_qa && answered_correct.has_value()) {
    throw InconsistentTrace("answer verdict on a sentence that never reached QA");
  }
  if (reached_qa) {
    if (label == Label::Positive && !answered_correct.has_value()) {
      throw InconsistentTrace("positive sentence reached QA without an answer verdict");
    }
    if (label == Label::Negative && answered_correct.value_or(false)) {
      throw InconsistentTrace("negative sentence cannot have a correct answer");
    }
  }

  if (label == Label::Positive) {
    if (!drug_found) return OutcomeCategory::PosNoDrug;
    if (!passed_classifier) return OutcomeCategory::PosFiltered;
    return *answered_correct ? OutcomeCategory::PosAnsweredCorrect
                             : OutcomeCategory::PosAnsweredWrong;
  }
  if (!drug_found) return OutcomeCategory::NegNoDrug;
  if (!passed_classifier) return OutcomeCategory::NegFiltered;
  return OutcomeCategory::NegAnswered;
}

ConfusionCounts cascade_confusion(const CascadeTally& tally) {
  ConfusionCounts counts;
  counts.tp = tally.of(OutcomeCategory::NegNoDrug) +
              tally.of(OutcomeCategory::NegFiltered) +
              tally.of(OutcomeCategory::PosAnsweredCorrect);
  counts.fn = tally.of(OutcomeCategory::PosNoDrug) +
              tally.of(OutcomeCategory::PosFiltered);
  counts.fp = tally.of(OutcomeCategory::PosAnsweredWrong) +
              tally.of(OutcomeCategory::NegAnswered);
  return counts;
}

FoldAssignment stratified_kfold(std::span<const int> labels, int k,
                                std::uint64_t seed) {
  if (k < 2) {
    throw KTooSmall("stratified k-fold needs k >= 2, got " + std::to_string(k));
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(i);
  }
  for (const auto& [cls, indices] : by_class) {
    if (indices.size() < static_cast<std::size_t>(k)) {
      throw KTooLarge("class " + std::to_string(cls) + " has " +
                      std::to_string(indices.size()) + " examples, fewer than k=" +
                      std::to_string(k));
    }
  }

  FoldAssignment assignment;
  assignment.k = k;
  assignment.seed = seed;
  assignment.fold_of.assign(labels.size(), 0);

  Rng rng(seed);
  for (auto& [cls, indices] : by_class) {
    rng.shuffle(indices);
    for (std::size_t pos = 0; pos < indices.size(); ++pos) {
      assignment.fold_of[indices[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    }
  }
  return assignment;
}

}  // namespace ade
