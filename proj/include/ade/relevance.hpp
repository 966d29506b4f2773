#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/errors.hpp"
#include "ade/neuralcore.hpp"
#include "ade/textproc.hpp"

namespace ade {

class SingleClassFold : public Error {
 public:
  using Error::Error;
};

struct RelevanceExample {
  std::vector<int> token_ids;
  int label = 0;  // 1 = contains a drug/adverse-event pair
};

std::vector<RelevanceExample> make_relevance_examples(
    const std::vector<LabeledSentence>& sentences, const Vocabulary& vocab);

// Mean-pooled embeddings -> tanh hidden layer -> sigmoid. The encoder sits
// behind this class boundary; a recurrent substitute only has to reproduce
// probability() and loss_and_grad().
class RelevanceModel {
 public:
  RelevanceModel(std::size_t vocab_size, std::size_t embed_dim,
                 std::size_t hidden_dim);

  void init_params(Rng& rng);

  double probability(std::span<const int> token_ids) const;

  // Binary cross-entropy; accumulates gradients into params().
  double loss_and_grad(std::span<const int> token_ids, int label);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

 private:
  Dense2D pooled(std::span<const int> token_ids) const;

  std::size_t vocab_size_;
  std::size_t embed_dim_;
  std::size_t hidden_dim_;
  ParameterSet params_;
  std::size_t emb_, w1_, b1_, w2_, b2_;
};

struct RelevanceTrainConfig {
  std::size_t epochs = 200;
  double lr = 0.05;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
};

struct RelevanceTrainResult {
  RelevanceModel model;
  std::vector<double> epoch_losses;  // mean per-example loss per epoch
};

// Single-example Adam steps over a seeded shuffle each epoch. Deterministic
// for a given seed. Throws SingleClassFold unless both classes are present.
RelevanceTrainResult train_relevance_fold(std::span<const RelevanceExample> fold,
                                          const RelevanceTrainConfig& config,
                                          std::size_t vocab_size,
                                          std::uint64_t seed);

struct RelevanceEnsemble {
  std::vector<RelevanceModel> models;
  double tau = 0.5;  // decision threshold, boundary inclusive
};

// Arithmetic mean of the per-model probabilities. Addends are summed in
// sorted order so the result is independent of model order.
double relevance_prob(const RelevanceEnsemble& ensemble,
                      std::span<const int> token_ids);
double relevance_prob(const RelevanceEnsemble& ensemble,
                      std::string_view sentence, const Vocabulary& vocab);

inline bool classify_relevant(double prob, double tau) { return prob >= tau; }

}  // namespace ade
