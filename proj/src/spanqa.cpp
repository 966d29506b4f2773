#include "ade/spanqa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ade {

namespace {

// Softmax over unmasked positions only; masked positions get exactly 0.
std::vector<double> masked_softmax(std::span<const double> logits,
                                   std::span<const std::uint8_t> mask) {
  std::vector<double> probs(logits.size(), 0.0);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) max_logit = std::max(max_logit, logits[i]);
  }
  if (!std::isfinite(max_logit)) {
    throw NoValidSpan("distribution has no unmasked position");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) probs[i] /= sum;
  }
  return probs;
}

}  // namespace

QaSequence build_qa_sequence(const DrugMention& drug,
                             const LabeledSentence& sentence,
                             const Vocabulary& vocab,
                             const AnnotationPair* gold_pair) {
  TokenizedText question = tokenize(drug.surface);
  TokenizedText context = tokenize(sentence.text);
  if (context.tokens.empty()) {
    throw GoldSpanUnmappable("sentence has no context tokens: '" +
                             sentence.text + "'");
  }

  QaSequence seq;
  seq.question_len = question.tokens.size();
  seq.context_begin = seq.question_len + 2;  // BOS + question + SEP

  seq.ids.reserve(seq.context_begin + context.tokens.size());
  seq.ids.push_back(Vocabulary::kBos);
  for (const auto& token : question.tokens) {
    seq.ids.push_back(vocab.lookup(token.surface));
  }
  seq.ids.push_back(Vocabulary::kSep);
  for (const auto& token : context.tokens) {
    seq.ids.push_back(vocab.lookup(token.surface));
    seq.context_spans.push_back({token.char_begin, token.char_end});
  }

  seq.segment.assign(seq.ids.size(), 0);
  for (std::size_t i = seq.context_begin; i < seq.ids.size(); ++i) {
    seq.segment[i] = 1;
  }

  if (gold_pair != nullptr) {
    TokenSpan context_span;
    try {
      context_span = char_span_to_token_span(context, gold_pair->ae_sent_span);
    } catch (const NoTokenOverlap& e) {
      throw GoldSpanUnmappable(std::string("gold adverse-event span: ") +
                               e.what());
    }
    seq.gold = TokenSpan{seq.context_begin + context_span.begin,
                         seq.context_begin + context_span.end};
  }
  return seq;
}

struct QaModel::ForwardState {
  Dense2D embedded;       // L x d
  AttentionCache attention;
  Dense2D attended;       // L x d, after the attention block
  Dense2D ff_pre;         // attended . wf + bf
  Dense2D ff_out;         // tanh(ff_pre)
  Dense2D logits;         // L x 2 (start, end)
};

QaModel::QaModel(std::size_t vocab_size, std::size_t embed_dim)
    : vocab_size_(vocab_size), embed_dim_(embed_dim) {
  emb_ = params_.add("embedding", vocab_size, embed_dim);
  wq_ = params_.add("attention.wq", embed_dim, embed_dim);
  wk_ = params_.add("attention.wk", embed_dim, embed_dim);
  wv_ = params_.add("attention.wv", embed_dim, embed_dim);
  wf_ = params_.add("feedforward.weight", embed_dim, embed_dim);
  bf_ = params_.add("feedforward.bias", 1, embed_dim);
  whead_ = params_.add("head.weight", embed_dim, 2);
  bhead_ = params_.add("head.bias", 1, 2);
}

void QaModel::init_params(Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim_));
  gaussian_init(params_[emb_].value, rng, 0.1);
  gaussian_init(params_[wq_].value, rng, scale);
  gaussian_init(params_[wk_].value, rng, scale);
  gaussian_init(params_[wv_].value, rng, scale);
  gaussian_init(params_[wf_].value, rng, scale);
  params_[bf_].value.fill(0.0);
  gaussian_init(params_[whead_].value, rng, scale);
  params_[bhead_].value.fill(0.0);
}

void QaModel::encode_sequence(const QaSequence& seq, ForwardState& state) const {
  const std::size_t length = seq.length();
  state.embedded = Dense2D(length, embed_dim_);
  const Dense2D& table = params_[emb_].value;
  for (std::size_t i = 0; i < length; ++i) {
    int id = seq.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
      throw IndexOutOfRange("token id " + std::to_string(id) +
                            " outside the embedding table");
    }
    for (std::size_t c = 0; c < embed_dim_; ++c) {
      state.embedded.at(i, c) = table.at(static_cast<std::size_t>(id), c);
    }
  }

  state.attended =
      attention_forward(state.embedded, params_[wq_].value, params_[wk_].value,
                        params_[wv_].value, &state.attention);

  state.ff_pre = matmul(state.attended, params_[wf_].value);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t c = 0; c < embed_dim_; ++c) {
      state.ff_pre.at(i, c) += params_[bf_].value.at(0, c);
    }
  }
  state.ff_out = state.ff_pre;
  for (double& v : state.ff_out.data()) v = std::tanh(v);

  state.logits = matmul(state.ff_out, params_[whead_].value);
  for (std::size_t i = 0; i < length; ++i) {
    state.logits.at(i, 0) += params_[bhead_].value.at(0, 0);
    state.logits.at(i, 1) += params_[bhead_].value.at(0, 1);
  }
}

SpanDistribution QaModel::forward(const QaSequence& seq) const {
  ForwardState state;
  encode_sequence(seq, state);

  const std::size_t length = seq.length();
  std::vector<double> start_logits(length);
  std::vector<double> end_logits(length);
  for (std::size_t i = 0; i < length; ++i) {
    start_logits[i] = state.logits.at(i, 0);
    end_logits[i] = state.logits.at(i, 1);
  }

  SpanDistribution dist;
  dist.mask = seq.segment;
  dist.start = masked_softmax(start_logits, dist.mask);
  dist.end = masked_softmax(end_logits, dist.mask);
  return dist;
}

double QaModel::loss_and_grad(const QaSequence& seq, double label_smoothing) {
  if (!seq.gold.has_value()) {
    throw GoldMasked("loss requested for a sequence without a gold span");
  }
  ForwardState state;
  encode_sequence(seq, state);

  const std::size_t length = seq.length();
  std::vector<double> start_logits(length);
  std::vector<double> end_logits(length);
  for (std::size_t i = 0; i < length; ++i) {
    start_logits[i] = state.logits.at(i, 0);
    end_logits[i] = state.logits.at(i, 1);
  }
  std::vector<double> start_probs = masked_softmax(start_logits, seq.segment);
  std::vector<double> end_probs = masked_softmax(end_logits, seq.segment);

  // Restrict to the K unmasked positions for the smoothed cross-entropy.
  std::vector<std::size_t> unmasked;
  for (std::size_t i = 0; i < length; ++i) {
    if (seq.segment[i]) unmasked.push_back(i);
  }
  auto restricted_index = [&](std::size_t position) {
    auto it = std::find(unmasked.begin(), unmasked.end(), position);
    if (it == unmasked.end()) {
      throw GoldMasked("gold index " + std::to_string(position) +
                       " lies on a masked position");
    }
    return static_cast<std::size_t>(it - unmasked.begin());
  };

  std::vector<double> start_restricted(unmasked.size());
  std::vector<double> end_restricted(unmasked.size());
  for (std::size_t j = 0; j < unmasked.size(); ++j) {
    start_restricted[j] = start_probs[unmasked[j]];
    end_restricted[j] = end_probs[unmasked[j]];
  }
  const std::size_t gold_start = restricted_index(seq.gold->begin);
  const std::size_t gold_end = restricted_index(seq.gold->end);

  const double loss =
      0.5 * (label_smoothed_ce(start_restricted, gold_start, label_smoothing) +
             label_smoothed_ce(end_restricted, gold_end, label_smoothing));

  std::vector<double> start_grad =
      label_smoothed_ce_logit_grad(start_restricted, gold_start, label_smoothing);
  std::vector<double> end_grad =
      label_smoothed_ce_logit_grad(end_restricted, gold_end, label_smoothing);

  Dense2D dlogits(length, 2);
  for (std::size_t j = 0; j < unmasked.size(); ++j) {
    dlogits.at(unmasked[j], 0) = 0.5 * start_grad[j];
    dlogits.at(unmasked[j], 1) = 0.5 * end_grad[j];
  }

  // Head.
  add_inplace(params_[whead_].grad, matmul_transpose_a(state.ff_out, dlogits));
  for (std::size_t i = 0; i < length; ++i) {
    params_[bhead_].grad.at(0, 0) += dlogits.at(i, 0);
    params_[bhead_].grad.at(0, 1) += dlogits.at(i, 1);
  }
  Dense2D dff_out = matmul_transpose_b(dlogits, params_[whead_].value);

  // Positionwise tanh layer.
  Dense2D dff_pre(length, embed_dim_);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t c = 0; c < embed_dim_; ++c) {
      double t = state.ff_out.at(i, c);
      dff_pre.at(i, c) = dff_out.at(i, c) * (1.0 - t * t);
    }
  }
  add_inplace(params_[wf_].grad, matmul_transpose_a(state.attended, dff_pre));
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t c = 0; c < embed_dim_; ++c) {
      params_[bf_].grad.at(0, c) += dff_pre.at(i, c);
    }
  }
  Dense2D dattended = matmul_transpose_b(dff_pre, params_[wf_].value);

  // Attention block.
  Dense2D dembedded(length, embed_dim_);
  attention_backward(state.embedded, params_[wq_].value, params_[wk_].value,
                     params_[wv_].value, state.attention, dattended, dembedded,
                     params_[wq_].grad, params_[wk_].grad, params_[wv_].grad);

  // Embedding rows.
  Dense2D& demb = params_[emb_].grad;
  for (std::size_t i = 0; i < length; ++i) {
    const auto row = static_cast<std::size_t>(seq.ids[i]);
    for (std::size_t c = 0; c < embed_dim_; ++c) {
      demb.at(row, c) += dembedded.at(i, c);
    }
  }
  return loss;
}

SpanDistribution qa_forward(const QaModel& model, const QaSequence& seq) {
  return model.forward(seq);
}

double qa_loss(const SpanDistribution& dist, TokenSpan gold,
               double label_smoothing) {
  std::vector<std::size_t> unmasked;
  for (std::size_t i = 0; i < dist.mask.size(); ++i) {
    if (dist.mask[i]) unmasked.push_back(i);
  }
  auto restricted_index = [&](std::size_t position) {
    auto it = std::find(unmasked.begin(), unmasked.end(), position);
    if (it == unmasked.end()) {
      throw GoldMasked("gold index " + std::to_string(position) +
                       " lies on a masked position");
    }
    return static_cast<std::size_t>(it - unmasked.begin());
  };
  std::vector<double> start_restricted(unmasked.size());
  std::vector<double> end_restricted(unmasked.size());
  for (std::size_t j = 0; j < unmasked.size(); ++j) {
    start_restricted[j] = dist.start[unmasked[j]];
    end_restricted[j] = dist.end[unmasked[j]];
  }
  return 0.5 *
         (label_smoothed_ce(start_restricted, restricted_index(gold.begin),
                            label_smoothing) +
          label_smoothed_ce(end_restricted, restricted_index(gold.end),
                            label_smoothing));
}

QaTrainResult train_qa_fold(std::span<const QaSequence> fold,
                            const QaTrainConfig& config,
                            std::size_t vocab_size, std::uint64_t seed) {
  if (fold.empty()) {
    throw EmptyFold("QA training fold has no examples");
  }
  for (const auto& seq : fold) {
    if (!seq.gold.has_value()) {
      throw GoldMasked("QA training fold contains a sequence without gold");
    }
  }

  Rng rng(seed);
  QaModel model(vocab_size, config.embed_dim);
  model.init_params(rng);
  AdamState adam(model.params());

  std::vector<std::size_t> order(fold.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> epoch_losses;
  epoch_losses.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t index : order) {
      model.params().zero_grads();
      total += model.loss_and_grad(fold[index], config.label_smoothing);
      adam_step(model.params(), adam, config.lr);
    }
    epoch_losses.push_back(total / static_cast<double>(fold.size()));
  }
  return {std::move(model), std::move(epoch_losses)};
}

SpanDistribution ensemble_distributions(
    const std::vector<SpanDistribution>& distributions) {
  if (distributions.empty()) {
    throw MaskMismatch("ensemble of zero distributions");
  }
  const auto& first = distributions.front();
  for (const auto& dist : distributions) {
    if (dist.mask != first.mask || dist.start.size() != first.start.size()) {
      throw MaskMismatch("ensemble inputs differ in length or mask");
    }
  }

  SpanDistribution out;
  out.mask = first.mask;
  out.start.assign(first.start.size(), 0.0);
  out.end.assign(first.end.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(distributions.size());
  std::vector<double> addends(distributions.size());
  for (std::size_t i = 0; i < first.start.size(); ++i) {
    for (std::size_t m = 0; m < distributions.size(); ++m) {
      addends[m] = distributions[m].start[i];
    }
    std::sort(addends.begin(), addends.end());
    out.start[i] = std::accumulate(addends.begin(), addends.end(), 0.0) * inv_n;
    for (std::size_t m = 0; m < distributions.size(); ++m) {
      addends[m] = distributions[m].end[i];
    }
    std::sort(addends.begin(), addends.end());
    out.end[i] = std::accumulate(addends.begin(), addends.end(), 0.0) * inv_n;
  }
  return out;
}

SpanPrediction decode_span(const SpanDistribution& dist,
                           std::size_t max_answer_len) {
  if (max_answer_len == 0) {
    throw DomainError("max_answer_len must be at least 1");
  }
  SpanPrediction best;
  bool found = false;
  const std::size_t length = dist.start.size();
  for (std::size_t s = 0; s < length; ++s) {
    if (!dist.mask[s]) continue;
    const std::size_t last = std::min(length - 1, s + max_answer_len - 1);
    for (std::size_t e = s; e <= last; ++e) {
      if (!dist.mask[e]) continue;
      double score = dist.start[s] * dist.end[e];
      if (!found || score > best.score) {
        best.start = s;
        best.end = e;
        best.score = score;
        found = true;
      }
    }
  }
  if (!found) {
    throw NoValidSpan("no valid (start, end) pair inside the answer mask");
  }
  return best;
}

std::string extract_answer_text(std::string_view sentence, SpanPrediction& pred,
                                const QaSequence& seq) {
  if (pred.start < seq.context_begin || pred.end < pred.start ||
      pred.end - seq.context_begin >= seq.context_spans.size()) {
    throw IndexOutOfRange("span prediction lies outside the context offset map");
  }
  const CharSpan begin_span = seq.context_spans[pred.start - seq.context_begin];
  const CharSpan end_span = seq.context_spans[pred.end - seq.context_begin];
  pred.char_span = {begin_span.begin, end_span.end};
  if (pred.char_span.end > sentence.size()) {
    throw IndexOutOfRange("offset map points past the end of the sentence");
  }
  pred.answer_text =
      std::string(sentence.substr(pred.char_span.begin, pred.char_span.size()));
  return pred.answer_text;
}

}  // namespace ade
