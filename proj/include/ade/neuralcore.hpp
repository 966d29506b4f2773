#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ade/errors.hpp"
#include "ade/rng.hpp"

namespace ade {

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

// Row-major dense matrix of 64-bit floats. Desk scale: clarity over speed.
class Dense2D {
 public:
  Dense2D() = default;
  Dense2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  bool same_shape(const Dense2D& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// c = a . b
Dense2D matmul(const Dense2D& a, const Dense2D& b);
// c = a^T . b
Dense2D matmul_transpose_a(const Dense2D& a, const Dense2D& b);
// c = a . b^T
Dense2D matmul_transpose_b(const Dense2D& a, const Dense2D& b);
void add_inplace(Dense2D& target, const Dense2D& delta);
void scale_inplace(Dense2D& target, double factor);

void gaussian_init(Dense2D& target, Rng& rng, double stddev);

// Numerically stable softmax (max subtraction). Output sums to 1.
std::vector<double> softmax(std::span<const double> scores);

// Loss under the smoothed target q = (1-eps) * onehot(target) + eps/K with
// K = probs.size(). Probabilities below 1e-12 are clamped before the log;
// a non-positive probability where q is positive raises DomainError.
double label_smoothed_ce(std::span<const double> probs, std::size_t target,
                         double eps);

// d(loss)/d(logits) when probs = softmax(logits): p - q.
std::vector<double> label_smoothed_ce_logit_grad(std::span<const double> probs,
                                                 std::size_t target, double eps);

// -[y log p + (1-y) log(1-p)] with p clamped to [1e-12, 1 - 1e-12].
double binary_cross_entropy(double p, int label);

double sigmoid(double x);

struct Parameter {
  std::string name;
  Dense2D value;
  Dense2D grad;
};

// Named parameters with same-shape gradient buffers.
class ParameterSet {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  void zero_grads();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(const ParameterSet& params, AdamConfig config = {});

  long step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

  friend void adam_step(ParameterSet& params, AdamState& state, double lr);

 private:
  std::vector<Dense2D> m_;
  std::vector<Dense2D> v_;
  long step_ = 0;
  AdamConfig config_;
};

// Bias-corrected Adam update, applied in place. A non-finite gradient
// anywhere aborts the whole step, leaving parameters untouched.
void adam_step(ParameterSet& params, AdamState& state, double lr);

struct AttentionCache {
  Dense2D q, k, v;
  Dense2D attn;  // row-softmax(q k^T / sqrt(d)), seq x seq
};

// y = x + softmax(x wq (x wk)^T / sqrt(d)) (x wv); x is seq x d, weights d x d.
Dense2D attention_forward(const Dense2D& x, const Dense2D& wq,
                          const Dense2D& wk, const Dense2D& wv,
                          AttentionCache* cache = nullptr);

// Accumulates into dx and the weight gradient buffers.
void attention_backward(const Dense2D& x, const Dense2D& wq, const Dense2D& wk,
                        const Dense2D& wv, const AttentionCache& cache,
                        const Dense2D& dy, Dense2D& dx, Dense2D& dwq,
                        Dense2D& dwk, Dense2D& dwv);

// Central finite differences against the analytic gradients already stored
// in params[i].grad. loss_fn must recompute the scalar loss from the current
// parameter values. Returns the worst relative error over all coordinates.
double finite_diff_grad_check(const std::function<double()>& loss_fn,
                              ParameterSet& params, double fd_eps = 1e-5);

}  // namespace ade
