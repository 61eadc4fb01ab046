#ifndef TOWE_PARAMS_HPP
#define TOWE_PARAMS_HPP

#include <cmath>
#include <deque>
#include <random>
#include <string>

#include "towe/tape.hpp"

namespace towe::ag {

template <typename S>
struct Parameter {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  Mat<S> adam_m, adam_v;
  bool trainable = true;

  void zero_grad() { grad.setZero(); }
};

// Owns model parameters; deque keeps references stable across add().
template <typename S>
class ParameterCollection {
 public:
  Parameter<S>& add(std::string name, Mat<S> init, bool trainable = true) {
    params_.push_back(Parameter<S>{std::move(name), std::move(init), {}, {}, {}, trainable});
    Parameter<S>& p = params_.back();
    p.grad = Mat<S>::Zero(p.value.rows(), p.value.cols());
    p.adam_m = Mat<S>::Zero(p.value.rows(), p.value.cols());
    p.adam_v = Mat<S>::Zero(p.value.rows(), p.value.cols());
    return p;
  }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::vector<Mat<S>> snapshot_values() const {
    std::vector<Mat<S>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
  }

  void restore_values(const std::vector<Mat<S>>& vals) {
    assert(vals.size() == params_.size());
    std::size_t i = 0;
    for (auto& p : params_) p.value = vals[i++];
  }

 private:
  std::deque<Parameter<S>> params_;
};

// Leaf node whose backward flushes into the parameter's gradient buffer.
template <typename S>
Var<S> param(Tape<S>& t, Parameter<S>& p) {
  Parameter<S>* pp = &p;
  return t.emplace(p.value, [pp](Tape<S>& t, int yi) {
    if (pp->trainable) pp->grad += t.grad(yi);
  });
}

template <typename S>
class Adam {
 public:
  S lr = S(1e-3);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  S clip_norm = S(0);  // 0 disables clipping

  void step(ParameterCollection<S>& pc) {
    ++t_;
    if (clip_norm > S(0)) {
      double sq = 0;
      for (auto& p : pc)
        if (p.trainable) sq += static_cast<double>(p.grad.squaredNorm());
      double norm = std::sqrt(sq);
      if (norm > static_cast<double>(clip_norm)) {
        S f = static_cast<S>(static_cast<double>(clip_norm) / norm);
        for (auto& p : pc)
          if (p.trainable) p.grad *= f;
      }
    }
    S bc1 = S(1) - std::pow(beta1, static_cast<S>(t_));
    S bc2 = S(1) - std::pow(beta2, static_cast<S>(t_));
    for (auto& p : pc) {
      if (!p.trainable) continue;
      p.adam_m = beta1 * p.adam_m + (S(1) - beta1) * p.grad;
      p.adam_v = beta2 * p.adam_v.array().matrix() +
                 (S(1) - beta2) * p.grad.array().square().matrix();
      auto mhat = p.adam_m.array() / bc1;
      auto vhat = p.adam_v.array() / bc2;
      p.value.array() -= lr * mhat / (vhat.sqrt() + eps);
    }
  }

  int steps_taken() const { return t_; }

 private:
  int t_ = 0;
};

}  // namespace towe::ag

namespace towe {

template <typename S>
Mat<S> xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<S>(dist(rng));
  return m;
}

template <typename S>
Mat<S> uniform_init(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                    std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<S>(dist(rng));
  return m;
}

}  // namespace towe

#endif
