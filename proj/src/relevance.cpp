#include "ade/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ade {

std::vector<RelevanceExample> make_relevance_examples(
    const std::vector<LabeledSentence>& sentences, const Vocabulary& vocab) {
  std::vector<RelevanceExample> examples;
  examples.reserve(sentences.size());
  for (const auto& sentence : sentences) {
    RelevanceExample example;
    example.token_ids = encode(tokenize(sentence.text), vocab);
    example.label = sentence.label == Label::Positive ? 1 : 0;
    examples.push_back(std::move(example));
  }
  return examples;
}

RelevanceModel::RelevanceModel(std::size_t vocab_size, std::size_t embed_dim,
                               std::size_t hidden_dim)
    : vocab_size_(vocab_size), embed_dim_(embed_dim), hidden_dim_(hidden_dim) {
  emb_ = params_.add("embedding", vocab_size, embed_dim);
  w1_ = params_.add("hidden.weight", embed_dim, hidden_dim);
  b1_ = params_.add("hidden.bias", 1, hidden_dim);
  w2_ = params_.add("output.weight", hidden_dim, 1);
  b2_ = params_.add("output.bias", 1, 1);
}

void RelevanceModel::init_params(Rng& rng) {
  gaussian_init(params_[emb_].value, rng, 0.1);
  gaussian_init(params_[w1_].value, rng,
                1.0 / std::sqrt(static_cast<double>(embed_dim_)));
  gaussian_init(params_[w2_].value, rng,
                1.0 / std::sqrt(static_cast<double>(hidden_dim_)));
  params_[b1_].value.fill(0.0);
  params_[b2_].value.fill(0.0);
}

Dense2D RelevanceModel::pooled(std::span<const int> token_ids) const {
  // Mean over token embeddings; an empty sentence pools to the zero vector.
  Dense2D x(1, embed_dim_);
  if (token_ids.empty()) return x;
  const Dense2D& table = params_[emb_].value;
  for (int id : token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
      throw IndexOutOfRange("token id " + std::to_string(id) +
                            " outside the embedding table");
    }
    for (std::size_t c = 0; c < embed_dim_; ++c) {
      x.at(0, c) += table.at(static_cast<std::size_t>(id), c);
    }
  }
  scale_inplace(x, 1.0 / static_cast<double>(token_ids.size()));
  return x;
}

double RelevanceModel::probability(std::span<const int> token_ids) const {
  Dense2D x = pooled(token_ids);
  Dense2D h = matmul(x, params_[w1_].value);
  add_inplace(h, params_[b1_].value);
  for (double& v : h.data()) v = std::tanh(v);
  Dense2D logit = matmul(h, params_[w2_].value);
  return sigmoid(logit.at(0, 0) + params_[b2_].value.at(0, 0));
}

double RelevanceModel::loss_and_grad(std::span<const int> token_ids, int label) {
  Dense2D x = pooled(token_ids);
  Dense2D pre = matmul(x, params_[w1_].value);
  add_inplace(pre, params_[b1_].value);
  Dense2D h = pre;
  for (double& v : h.data()) v = std::tanh(v);
  Dense2D logit = matmul(h, params_[w2_].value);
  const double z = logit.at(0, 0) + params_[b2_].value.at(0, 0);
  const double p = sigmoid(z);
  const double loss = binary_cross_entropy(p, label);

  // Sigmoid and BCE fuse to d(loss)/dz = p - y.
  const double dz = p - static_cast<double>(label);
  params_[b2_].grad.at(0, 0) += dz;
  for (std::size_t r = 0; r < hidden_dim_; ++r) {
    params_[w2_].grad.at(r, 0) += h.at(0, r) * dz;
  }
  Dense2D dh(1, hidden_dim_);
  for (std::size_t r = 0; r < hidden_dim_; ++r) {
    dh.at(0, r) = params_[w2_].value.at(r, 0) * dz;
  }
  Dense2D dpre(1, hidden_dim_);
  for (std::size_t r = 0; r < hidden_dim_; ++r) {
    dpre.at(0, r) = dh.at(0, r) * (1.0 - h.at(0, r) * h.at(0, r));
  }
  add_inplace(params_[b1_].grad, dpre);
  add_inplace(params_[w1_].grad, matmul_transpose_a(x, dpre));
  Dense2D dx = matmul_transpose_b(dpre, params_[w1_].value);

  if (!token_ids.empty()) {
    const double inv_n = 1.0 / static_cast<double>(token_ids.size());
    Dense2D& demb = params_[emb_].grad;
    for (int id : token_ids) {
      for (std::size_t c = 0; c < embed_dim_; ++c) {
        demb.at(static_cast<std::size_t>(id), c) += dx.at(0, c) * inv_n;
      }
    }
  }
  return loss;
}

RelevanceTrainResult train_relevance_fold(std::span<const RelevanceExample> fold,
                                          const RelevanceTrainConfig& config,
                                          std::size_t vocab_size,
                                          std::uint64_t seed) {
  bool has_pos = false;
  bool has_neg = false;
  for (const auto& example : fold) {
    (example.label != 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw SingleClassFold("relevance training fold holds a single class");
  }

  Rng rng(seed);
  RelevanceModel model(vocab_size, config.embed_dim, config.hidden_dim);
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
      const auto& example = fold[index];
      model.params().zero_grads();
      total += model.loss_and_grad(example.token_ids, example.label);
      adam_step(model.params(), adam, config.lr);
    }
    epoch_losses.push_back(total / static_cast<double>(fold.size()));
  }
  return {std::move(model), std::move(epoch_losses)};
}

double relevance_prob(const RelevanceEnsemble& ensemble,
                      std::span<const int> token_ids) {
  if (ensemble.models.empty()) {
    throw InvariantError("relevance ensemble has no models");
  }
  std::vector<double> probs;
  probs.reserve(ensemble.models.size());
  for (const auto& model : ensemble.models) {
    probs.push_back(model.probability(token_ids));
  }
  std::sort(probs.begin(), probs.end());
  double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  return sum / static_cast<double>(probs.size());
}

double relevance_prob(const RelevanceEnsemble& ensemble,
                      std::string_view sentence, const Vocabulary& vocab) {
  std::vector<int> ids = encode(tokenize(sentence), vocab);
  return relevance_prob(ensemble, ids);
}

}  // namespace ade
