#include "ade/neuralcore.hpp"

#include <algorithm>
#include <cmath>

namespace ade {

namespace {

constexpr double kProbFloor = 1e-12;

void require_shape(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

}  // namespace

Dense2D matmul(const Dense2D& a, const Dense2D& b) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Dense2D c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        c.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return c;
}

Dense2D matmul_transpose_a(const Dense2D& a, const Dense2D& b) {
  require_shape(a.rows() == b.rows(), "matmul_transpose_a: row counts differ");
  Dense2D c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double aki = a.at(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        c.at(i, j) += aki * b.at(k, j);
      }
    }
  }
  return c;
}

Dense2D matmul_transpose_b(const Dense2D& a, const Dense2D& b) {
  require_shape(a.cols() == b.cols(), "matmul_transpose_b: col counts differ");
  Dense2D c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        sum += a.at(i, k) * b.at(j, k);
      }
      c.at(i, j) = sum;
    }
  }
  return c;
}

void add_inplace(Dense2D& target, const Dense2D& delta) {
  require_shape(target.same_shape(delta), "add_inplace: shapes differ");
  for (std::size_t i = 0; i < target.data().size(); ++i) {
    target.data()[i] += delta.data()[i];
  }
}

void scale_inplace(Dense2D& target, double factor) {
  for (double& v : target.data()) v *= factor;
}

void gaussian_init(Dense2D& target, Rng& rng, double stddev) {
  for (double& v : target.data()) v = stddev * rng.gaussian();
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> probs(scores.size());
  if (scores.empty()) return probs;
  double max_score = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i] - max_score);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

double label_smoothed_ce(std::span<const double> probs, std::size_t target,
                         double eps) {
  if (probs.empty() || target >= probs.size()) {
    throw DomainError("label_smoothed_ce: target index out of range");
  }
  if (eps < 0.0 || eps >= 1.0) {
    throw DomainError("label_smoothed_ce: eps must lie in [0, 1)");
  }
  const double k = static_cast<double>(probs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double q = eps / k + (i == target ? 1.0 - eps : 0.0);
    if (q == 0.0) continue;
    if (probs[i] <= 0.0) {
      throw DomainError("label_smoothed_ce: non-positive probability at a "
                        "position with positive target mass");
    }
    loss -= q * std::log(std::max(probs[i], kProbFloor));
  }
  return loss;
}

std::vector<double> label_smoothed_ce_logit_grad(std::span<const double> probs,
                                                 std::size_t target,
                                                 double eps) {
  if (probs.empty() || target >= probs.size()) {
    throw DomainError("label_smoothed_ce_logit_grad: target index out of range");
  }
  const double k = static_cast<double>(probs.size());
  std::vector<double> grad(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double q = eps / k + (i == target ? 1.0 - eps : 0.0);
    grad[i] = probs[i] - q;
  }
  return grad;
}

double binary_cross_entropy(double p, int label) {
  p = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
  return label != 0 ? -std::log(p) : -std::log(1.0 - p);
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t ParameterSet::add(std::string name, std::size_t rows,
                              std::size_t cols) {
  if (find(name) != nullptr) {
    throw InvariantError("duplicate parameter name: " + name);
  }
  params_.push_back({std::move(name), Dense2D(rows, cols), Dense2D(rows, cols)});
  return params_.size() - 1;
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParameterSet::zero_grads() {
  for (auto& p : params_) p.grad.fill(0.0);
}

AdamState::AdamState(const ParameterSet& params, AdamConfig config)
    : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.value.rows(), p.value.cols());
    v_.emplace_back(p.value.rows(), p.value.cols());
  }
}

void adam_step(ParameterSet& params, AdamState& state, double lr) {
  if (params.size() != state.m_.size()) {
    throw ShapeMismatch("adam_step: state built for a different parameter set");
  }
  if (!(lr > 0.0)) throw DomainError("adam_step: lr must be positive");
  for (const auto& p : params) {
    for (double g : p.grad.data()) {
      if (!std::isfinite(g)) {
        throw NonFiniteGradient("adam_step: non-finite gradient in " + p.name);
      }
    }
  }

  const AdamConfig& cfg = state.config_;
  const long t = ++state.step_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].value.data();
    const auto& grad = params[i].grad.data();
    auto& m = state.m_[i].data();
    auto& v = state.v_[i].data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
      double m_hat = m[j] / bc1;
      double v_hat = v[j] / bc2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

Dense2D attention_forward(const Dense2D& x, const Dense2D& wq,
                          const Dense2D& wk, const Dense2D& wv,
                          AttentionCache* cache) {
  const std::size_t d = x.cols();
  require_shape(wq.rows() == d && wq.cols() == d, "attention: wq shape");
  require_shape(wk.rows() == d && wk.cols() == d, "attention: wk shape");
  require_shape(wv.rows() == d && wv.cols() == d, "attention: wv shape");

  Dense2D q = matmul(x, wq);
  Dense2D k = matmul(x, wk);
  Dense2D v = matmul(x, wv);

  Dense2D scores = matmul_transpose_b(q, k);
  scale_inplace(scores, 1.0 / std::sqrt(static_cast<double>(d)));

  Dense2D attn(x.rows(), x.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    std::vector<double> row = softmax(
        std::span<const double>(scores.data().data() + r * scores.cols(),
                                scores.cols()));
    for (std::size_t c = 0; c < row.size(); ++c) attn.at(r, c) = row[c];
  }

  Dense2D y = matmul(attn, v);
  add_inplace(y, x);  // residual connection

  if (cache != nullptr) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
  }
  return y;
}

void attention_backward(const Dense2D& x, const Dense2D& wq, const Dense2D& wk,
                        const Dense2D& wv, const AttentionCache& cache,
                        const Dense2D& dy, Dense2D& dx, Dense2D& dwq,
                        Dense2D& dwk, Dense2D& dwv) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.cols()));

  // Residual branch.
  add_inplace(dx, dy);

  Dense2D d_attn = matmul_transpose_b(dy, cache.v);   // seq x seq
  Dense2D d_v = matmul_transpose_a(cache.attn, dy);   // seq x d

  // Row-softmax backward: ds_ij = a_ij * (da_ij - sum_k a_ik da_ik).
  Dense2D d_scores(d_attn.rows(), d_attn.cols());
  for (std::size_t r = 0; r < d_attn.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < d_attn.cols(); ++c) {
      dot += cache.attn.at(r, c) * d_attn.at(r, c);
    }
    for (std::size_t c = 0; c < d_attn.cols(); ++c) {
      d_scores.at(r, c) =
          cache.attn.at(r, c) * (d_attn.at(r, c) - dot) * inv_sqrt_d;
    }
  }

  Dense2D d_q = matmul(d_scores, cache.k);
  Dense2D d_k = matmul_transpose_a(d_scores, cache.q);

  add_inplace(dwq, matmul_transpose_a(x, d_q));
  add_inplace(dwk, matmul_transpose_a(x, d_k));
  add_inplace(dwv, matmul_transpose_a(x, d_v));

  add_inplace(dx, matmul_transpose_b(d_q, wq));
  add_inplace(dx, matmul_transpose_b(d_k, wk));
  add_inplace(dx, matmul_transpose_b(d_v, wv));
}

double finite_diff_grad_check(const std::function<double()>& loss_fn,
                              ParameterSet& params, double fd_eps) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].value.data();
    const auto& grad = params[i].grad.data();
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double original = value[j];
      value[j] = original + fd_eps;
      double loss_plus = loss_fn();
      value[j] = original - fd_eps;
      double loss_minus = loss_fn();
      value[j] = original;
      double fd = (loss_plus - loss_minus) / (2.0 * fd_eps);
      // Coordinates below the central-difference noise floor are compared
      // absolutely; relative error is meaningless there.
      double denom = std::max(std::abs(fd) + std::abs(grad[j]), 1e-6);
      worst = std::max(worst, std::abs(fd - grad[j]) / denom);
    }
  }
  return worst;
}

}  // namespace ade
