#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/errors.hpp"
#include "ade/nerstage.hpp"
#include "ade/neuralcore.hpp"
#include "ade/textproc.hpp"

namespace ade {

class GoldSpanUnmappable : public Error {
 public:
  using Error::Error;
};

class GoldMasked : public Error {
 public:
  using Error::Error;
};

class EmptyFold : public Error {
 public:
  using Error::Error;
};

class NoValidSpan : public Error {
 public:
  using Error::Error;
};

class MaskMismatch : public Error {
 public:
  using Error::Error;
};

// Encoded QA input: [BOS][question tokens][SEP][context tokens]. The drug
// surface is the question (segment A); the sentence is the context
// (segment B). Answers can only live in segment B.
struct QaSequence {
  std::vector<int> ids;
  std::vector<std::uint8_t> segment;  // 0 = A (BOS/question/SEP), 1 = B
  std::size_t question_len = 0;
  std::size_t context_begin = 0;  // sequence index of the first context token
  std::vector<CharSpan> context_spans;  // char spans of context tokens
  std::optional<TokenSpan> gold;  // adverse-event span in sequence coords

  std::size_t length() const { return ids.size(); }
  bool in_context(std::size_t position) const {
    return position < segment.size() && segment[position] == 1;
  }
};

// Maps the gold AE char span through the tokenizer and shifts it past the
// question; throws GoldSpanUnmappable when no context token overlaps it.
QaSequence build_qa_sequence(const DrugMention& drug,
                             const LabeledSentence& sentence,
                             const Vocabulary& vocab,
                             const AnnotationPair* gold_pair);

// Per-position start and end probabilities over the whole sequence. Masked
// positions (segment A) carry exactly zero probability.
struct SpanDistribution {
  std::vector<double> start;
  std::vector<double> end;
  std::vector<std::uint8_t> mask;  // 1 where probability may be nonzero
};

// Encoder (embedding + one attention block + positionwise tanh layer)
// followed by a shared per-position linear map to two logits, the
// convolution-style start/end head.
class QaModel {
 public:
  QaModel(std::size_t vocab_size, std::size_t embed_dim);

  void init_params(Rng& rng);

  SpanDistribution forward(const QaSequence& seq) const;

  // Mean of the label-smoothed start and end cross-entropies; accumulates
  // gradients into params(). The sequence must carry a gold span.
  double loss_and_grad(const QaSequence& seq, double label_smoothing);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t embed_dim() const { return embed_dim_; }

 private:
  struct ForwardState;
  void encode_sequence(const QaSequence& seq, ForwardState& state) const;

  std::size_t vocab_size_;
  std::size_t embed_dim_;
  ParameterSet params_;
  std::size_t emb_, wq_, wk_, wv_, wf_, bf_, whead_, bhead_;
};

SpanDistribution qa_forward(const QaModel& model, const QaSequence& seq);

// Mean of label-smoothed cross-entropies on the start and end distributions,
// each taken over the K unmasked positions. Throws GoldMasked when the gold
// indices fall on masked positions.
double qa_loss(const SpanDistribution& dist, TokenSpan gold,
               double label_smoothing);

// The default lr is deliberately small: single-example Adam keeps taking
// lr-sized steps once the loss sits at the label-smoothing floor, and larger
// rates can bounce the model out of the memorized optimum.
struct QaTrainConfig {
  std::size_t epochs = 300;
  double lr = 0.005;
  std::size_t embed_dim = 32;
  double label_smoothing = 0.1;
};

struct QaTrainResult {
  QaModel model;
  std::vector<double> epoch_losses;
};

QaTrainResult train_qa_fold(std::span<const QaSequence> fold,
                            const QaTrainConfig& config,
                            std::size_t vocab_size, std::uint64_t seed);

struct QaEnsemble {
  std::vector<QaModel> models;
};

// Elementwise arithmetic mean; all inputs must share length and mask.
// Addends are summed in sorted order so model order never matters.
SpanDistribution ensemble_distributions(
    const std::vector<SpanDistribution>& distributions);

struct SpanPrediction {
  std::size_t start = 0;  // sequence coords
  std::size_t end = 0;
  double score = 0.0;     // P_start(start) * P_end(end)
  CharSpan char_span;     // filled by extract_answer_text
  std::string answer_text;
};

// Argmax of P_start(s) * P_end(e) over valid pairs: s <= e, both unmasked,
// e - s < max_answer_len. Ties break toward the smaller s, then smaller e.
SpanPrediction decode_span(const SpanDistribution& dist,
                           std::size_t max_answer_len);

// Maps the predicted token indices through the sequence offset map and
// fills char_span/answer_text from the sentence.
std::string extract_answer_text(std::string_view sentence, SpanPrediction& pred,
                                const QaSequence& seq);

}  // namespace ade
