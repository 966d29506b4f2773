#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/errors.hpp"
#include "ade/evalx.hpp"
#include "ade/nerstage.hpp"
#include "ade/relevance.hpp"
#include "ade/spanqa.hpp"
#include "ade/textproc.hpp"

namespace ade {

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

class CorruptBundle : public Error {
 public:
  using Error::Error;
};

enum class PairRule { AnyPair, AllPairs };
enum class MatchSelection { Exact, Overlap, Both };

struct PipelineConfig {
  std::uint64_t seed = 42;
  int classifier_folds = 10;
  int qa_folds = 5;
  std::size_t relevance_epochs = 200;
  std::size_t qa_epochs = 300;
  double relevance_lr = 0.05;
  double qa_lr = 0.005;
  double label_smoothing = 0.1;
  double tau = 0.5;
  std::size_t max_answer_len = 10;
  MatchSelection match = MatchSelection::Both;
  PairRule pair_rule = PairRule::AnyPair;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t vocab_min_count = 1;
  int jobs = 1;
  std::string eval_data;  // provenance of the evaluated dataset, report echo

  void validate() const;  // throws DomainError on out-of-range fields

  std::string to_json_text(int indent = -1) const;
  static PipelineConfig from_json_text(const std::string& text);
};

std::string to_string(MatchSelection selection);
MatchSelection match_selection_from_string(const std::string& text);
std::string to_string(PairRule rule);
PairRule pair_rule_from_string(const std::string& text);

struct TrainedBundle {
  PipelineConfig config;
  Vocabulary vocab;
  DrugLexicon lexicon;
  RelevanceEnsemble relevance;
  QaEnsemble qa;
};

struct TrainOutput {
  TrainedBundle bundle;
  std::vector<std::vector<double>> relevance_losses;  // per fold, per epoch
  std::vector<std::vector<double>> qa_losses;
};

// Builds vocabulary and lexicon from the given sentences only (they are the
// training portion; evaluation data never leaks in), then trains the
// classifier and QA fold ensembles. Fold seeds are config.seed + fold index.
// lexicon_override, when given, replaces the gazetteer built from gold
// annotations. Stage failures carry a "[stage]" tag in the message.
TrainOutput train_pipeline(const std::vector<LabeledSentence>& train_sentences,
                           const PipelineConfig& config,
                           const DrugLexicon* lexicon_override = nullptr);

enum class EliminationStage { None, Ner, Classifier };

struct DrugAnswer {
  DrugMention mention;
  SpanPrediction prediction;
};

struct SentenceTrace {
  std::string sentence_id;
  EliminationStage eliminated_at = EliminationStage::None;
  std::vector<DrugMention> mentions;
  std::optional<double> relevance_probability;
  std::vector<DrugAnswer> answers;
  // Set during evaluation, when gold labels are known.
  std::optional<OutcomeCategory> category_exact;
  std::optional<OutcomeCategory> category_overlap;
};

// Shares the recognizer across many run() calls on one bundle.
class PipelineRuntime {
 public:
  explicit PipelineRuntime(const TrainedBundle& bundle);

  SentenceTrace run(const LabeledSentence& sentence) const;

  const TrainedBundle& bundle() const { return bundle_; }

 private:
  const TrainedBundle& bundle_;
  LexiconRecognizer recognizer_;
};

// Stage short-circuiting single-sentence run: no drug mention eliminates at
// the NER stage, an ensemble probability below tau eliminates at the
// classifier, otherwise every mention gets a decoded answer span.
SentenceTrace run_sentence(const TrainedBundle& bundle,
                           const LabeledSentence& sentence);

struct NerStageMetrics {
  long long pos_total = 0;
  long long pos_with_drug = 0;
  long long neg_total = 0;
  long long neg_with_drug = 0;
};

struct ClassifierStageMetrics {
  long long reached = 0;
  ConfusionCounts counts;  // pass/filter decisions vs labels
  PrfScores scores;
};

struct QaStageMetrics {
  long long reached_positives = 0;
  long long exact_correct = 0;
  long long overlap_correct = 0;
};

struct EndToEndBlock {
  CascadeTally tally;
  ConfusionCounts counts;
  PrfScores scores;
};

struct RunReport {
  PipelineConfig config;
  NerStageMetrics ner;
  ClassifierStageMetrics classifier;
  QaStageMetrics qa;
  std::optional<EndToEndBlock> exact;
  std::optional<EndToEndBlock> overlap;
  std::vector<SentenceTrace> traces;  // filled only when requested
  bool include_traces = false;

  std::string to_json_text() const;  // deterministic byte layout
};

// Runs every test sentence through the cascade, categorizes it per the
// outcome lattice under the selected match criteria, and assembles the
// report. Verifies the partition identity TP+FN+FP == |test|.
RunReport evaluate_end_to_end(const TrainedBundle& bundle,
                              const std::vector<LabeledSentence>& test_sentences,
                              bool include_traces = false);

// Versioned single-file JSON with a whole-payload checksum. Numbers are
// written with shortest round-trip formatting, so save -> load -> save is
// byte-identical and inference outputs match bitwise.
void save_bundle(const TrainedBundle& bundle, const std::string& path);
TrainedBundle load_bundle(const std::string& path);

// FNV-1a 64-bit, used for the bundle payload checksum.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace ade
