#ifndef TOWE_TAPE_HPP
#define TOWE_TAPE_HPP

#include <cassert>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "towe/common.hpp"

// Reverse-mode autodiff over dense Eigen matrices. A Tape is rebuilt per
// forward pass; nodes are created in topological order, so backward() is a
// single reverse sweep. Scalar-templated: float for training, double for
// finite-difference checks.
namespace towe::ag {

template <typename S>
class Tape;

template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  const Mat<S>& value() const { return tape->value(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

template <typename S>
class Tape {
 public:
  struct Node {
    Mat<S> value;
    Mat<S> grad;  // empty until first accumulation
    std::function<void(Tape&, int)> backprop;
  };

  // Constant leaf; gradients flowing into it are kept but go nowhere.
  Var<S> input(Mat<S> v) { return emplace(std::move(v), nullptr); }

  Var<S> emplace(Mat<S> v, std::function<void(Tape&, int)> bp) {
    nodes_.push_back(Node{std::move(v), {}, std::move(bp)});
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  Mat<S>& value(int id) { return nodes_[id].value; }
  const Mat<S>& value(int id) const { return nodes_[id].value; }

  // Accumulation target, zero-initialised on first touch.
  Mat<S>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }

  void backward(Var<S> root) {
    assert(root.tape == this);
    assert(value(root.id).rows() == 1 && value(root.id).cols() == 1);
    grad(root.id).setConstant(S(1));
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      // Nodes never reached by the sweep keep an empty grad and are skipped.
      if (n.backprop && n.grad.size() != 0) n.backprop(*this, i);
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// ---- linear algebra --------------------------------------------------------

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape;
  Mat<S> y = a.value() * b.value();
  int ai = a.id, bi = b.id;
  return t.emplace(std::move(y), [ai, bi](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    t.grad(ai).noalias() += g * t.value(bi).transpose();
    t.grad(bi).noalias() += t.value(ai).transpose() * g;
  });
}

template <typename S>
Var<S> transpose(Var<S> a) {
  Tape<S>& t = *a.tape;
  int ai = a.id;
  return t.emplace(a.value().transpose(), [ai](Tape<S>& t, int yi) {
    t.grad(ai) += t.grad(yi).transpose();
  });
}

// ---- pointwise --------------------------------------------------------------

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape;
  int ai = a.id, bi = b.id;
  return t.emplace(a.value() + b.value(), [ai, bi](Tape<S>& t, int yi) {
    t.grad(ai) += t.grad(yi);
    t.grad(bi) += t.grad(yi);
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape;
  int ai = a.id, bi = b.id;
  return t.emplace(a.value() - b.value(), [ai, bi](Tape<S>& t, int yi) {
    t.grad(ai) += t.grad(yi);
    t.grad(bi) -= t.grad(yi);
  });
}

// Broadcast a 1xd row vector over every row of a.
template <typename S>
Var<S> add_rowvec(Var<S> a, Var<S> r) {
  Tape<S>& t = *a.tape;
  assert(r.rows() == 1 && r.cols() == a.cols());
  Mat<S> y = a.value().rowwise() + r.value().row(0);
  int ai = a.id, ri = r.id;
  return t.emplace(std::move(y), [ai, ri](Tape<S>& t, int yi) {
    t.grad(ai) += t.grad(yi);
    t.grad(ri) += t.grad(yi).colwise().sum();
  });
}

template <typename S>
Var<S> cmul(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape;
  Mat<S> y = a.value().cwiseProduct(b.value());
  int ai = a.id, bi = b.id;
  return t.emplace(std::move(y), [ai, bi](Tape<S>& t, int yi) {
    t.grad(ai) += t.grad(yi).cwiseProduct(t.value(bi));
    t.grad(bi) += t.grad(yi).cwiseProduct(t.value(ai));
  });
}

template <typename S>
Var<S> scale(Var<S> a, S c) {
  Tape<S>& t = *a.tape;
  int ai = a.id;
  return t.emplace(Mat<S>(a.value() * c), [ai, c](Tape<S>& t, int yi) {
    t.grad(ai) += t.grad(yi) * c;
  });
}

template <typename S>
Var<S> one_minus(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y = Mat<S>::Ones(a.rows(), a.cols()) - a.value();
  int ai = a.id;
  return t.emplace(std::move(y), [ai](Tape<S>& t, int yi) {
    t.grad(ai) -= t.grad(yi);
  });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y = ((-a.value().array()).exp() + S(1)).inverse().matrix();
  int ai = a.id;
  return t.emplace(std::move(y), [ai](Tape<S>& t, int yi) {
    const Mat<S>& y = t.value(yi);
    t.grad(ai).array() += t.grad(yi).array() * y.array() * (S(1) - y.array());
  });
}

template <typename S>
Var<S> tanh_(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y = a.value().array().tanh().matrix();
  int ai = a.id;
  return t.emplace(std::move(y), [ai](Tape<S>& t, int yi) {
    const Mat<S>& y = t.value(yi);
    t.grad(ai).array() += t.grad(yi).array() * (S(1) - y.array().square());
  });
}

template <typename S>
Var<S> relu(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y = a.value().cwiseMax(S(0));
  int ai = a.id;
  return t.emplace(std::move(y), [ai](Tape<S>& t, int yi) {
    t.grad(ai).array() +=
        t.grad(yi).array() * (t.value(ai).array() > S(0)).template cast<S>();
  });
}

// ---- row-structured ops ------------------------------------------------------

// Numerically stable row-wise softmax.
template <typename S>
Var<S> softmax_rows(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    auto row = y.row(i).array();
    row -= row.maxCoeff();
    row = row.exp();
    row /= row.sum();
  }
  int ai = a.id;
  return t.emplace(std::move(y), [ai](Tape<S>& t, int yi) {
    const Mat<S>& y = t.value(yi);
    const Mat<S>& g = t.grad(yi);
    Mat<S>& da = t.grad(ai);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      S dot = g.row(i).dot(y.row(i));
      da.row(i).array() += (g.row(i).array() - dot) * y.row(i).array();
    }
  });
}

// Cumulative sum along each row (left to right).
template <typename S>
Var<S> cumsum_rows(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 1; j < y.cols(); ++j) y(i, j) += y(i, j - 1);
  int ai = a.id;
  return t.emplace(std::move(y), [ai](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    Mat<S>& da = t.grad(ai);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      S acc = S(0);
      for (Eigen::Index j = g.cols() - 1; j >= 0; --j) {
        acc += g(i, j);
        da(i, j) += acc;
      }
    }
  });
}

// cumax(x) = cumsum(softmax(x)) along rows; monotone in [0,1], ends at 1.
template <typename S>
Var<S> cumax_rows(Var<S> a) {
  return cumsum_rows(softmax_rows(a));
}

// ---- shape ops -----------------------------------------------------------------

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  assert(!parts.empty());
  Tape<S>& t = *parts.front().tape;
  Eigen::Index rows = parts.front().rows(), cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Mat<S> y(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id);
    widths.push_back(p.cols());
    at += p.cols();
  }
  return t.emplace(std::move(y), [ids, widths](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      t.grad(ids[k]) += g.middleCols(at, widths[k]);
      at += widths[k];
    }
  });
}

// Stack 1xd rows into an n x d matrix.
template <typename S>
Var<S> vstack(const std::vector<Var<S>>& rows) {
  assert(!rows.empty());
  Tape<S>& t = *rows.front().tape;
  Eigen::Index d = rows.front().cols();
  Mat<S> y(static_cast<Eigen::Index>(rows.size()), d);
  std::vector<int> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    assert(rows[i].rows() == 1);
    y.row(static_cast<Eigen::Index>(i)) = rows[i].value().row(0);
    ids.push_back(rows[i].id);
  }
  return t.emplace(std::move(y), [ids](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    for (std::size_t i = 0; i < ids.size(); ++i)
      t.grad(ids[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

template <typename S>
Var<S> row(Var<S> a, Eigen::Index i) {
  Tape<S>& t = *a.tape;
  int ai = a.id;
  return t.emplace(Mat<S>(a.value().row(i)), [ai, i](Tape<S>& t, int yi) {
    t.grad(ai).row(i) += t.grad(yi).row(0);
  });
}

template <typename S>
Var<S> slice_cols(Var<S> a, Eigen::Index start, Eigen::Index len) {
  Tape<S>& t = *a.tape;
  int ai = a.id;
  return t.emplace(Mat<S>(a.value().middleCols(start, len)),
                   [ai, start, len](Tape<S>& t, int yi) {
                     t.grad(ai).middleCols(start, len) += t.grad(yi);
                   });
}

// Row gather: y.row(k) = a.row(ids[k]); backward scatter-adds.
template <typename S>
Var<S> gather_rows(Var<S> a, std::vector<int> ids) {
  Tape<S>& t = *a.tape;
  Mat<S> y(static_cast<Eigen::Index>(ids.size()), a.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) y.row(static_cast<Eigen::Index>(k)) = a.value().row(ids[k]);
  int ai = a.id;
  return t.emplace(std::move(y), [ai, ids = std::move(ids)](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    Mat<S>& da = t.grad(ai);
    for (std::size_t k = 0; k < ids.size(); ++k)
      da.row(ids[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

// Shifted copy with zero padding: y.row(i) = a.row(i + offset) when in range.
template <typename S>
Var<S> shift_rows(Var<S> a, int offset) {
  Tape<S>& t = *a.tape;
  Eigen::Index n = a.rows();
  Mat<S> y = Mat<S>::Zero(n, a.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j = i + offset;
    if (j >= 0 && j < n) y.row(i) = a.value().row(j);
  }
  int ai = a.id;
  return t.emplace(std::move(y), [ai, offset, n](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    Mat<S>& da = t.grad(ai);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index j = i + offset;
      if (j >= 0 && j < n) da.row(j) += g.row(i);
    }
  });
}

// Each column repeated k times in place: (a b) with k=2 becomes (a a b b).
template <typename S>
Var<S> repeat_interleave_cols(Var<S> a, int k) {
  Tape<S>& t = *a.tape;
  Mat<S> y(a.rows(), a.cols() * k);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (int r = 0; r < k; ++r) y.col(j * k + r) = a.value().col(j);
  int ai = a.id;
  Eigen::Index cols = a.cols();
  return t.emplace(std::move(y), [ai, k, cols](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    Mat<S>& da = t.grad(ai);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (int r = 0; r < k; ++r) da.col(j) += g.col(j * k + r);
  });
}

// ---- reductions and losses ----------------------------------------------------

template <typename S>
Var<S> sum_all(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y(1, 1);
  y(0, 0) = a.value().sum();
  int ai = a.id;
  return t.emplace(std::move(y), [ai](Tape<S>& t, int yi) {
    t.grad(ai).array() += t.grad(yi)(0, 0);
  });
}

// Mean over rows of -log softmax(logits)[gold]; fused for stability.
template <typename S>
Var<S> cross_entropy_rows(Var<S> logits, std::vector<int> gold) {
  Tape<S>& t = *logits.tape;
  assert(static_cast<Eigen::Index>(gold.size()) == logits.rows());
  const Mat<S>& x = logits.value();
  Eigen::Index n = x.rows();
  Mat<S> probs(n, x.cols());
  S total = S(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    S m = x.row(i).maxCoeff();
    auto shifted = (x.row(i).array() - m).exp();
    S z = shifted.sum();
    probs.row(i) = (shifted / z).matrix();
    total += std::log(z) + m - x(i, gold[static_cast<std::size_t>(i)]);
  }
  Mat<S> y(1, 1);
  y(0, 0) = total / static_cast<S>(n);
  int li = logits.id;
  return t.emplace(std::move(y),
                   [li, gold = std::move(gold), probs = std::move(probs), n](Tape<S>& t, int yi) {
                     S g = t.grad(yi)(0, 0) / static_cast<S>(n);
                     Mat<S>& dl = t.grad(li);
                     dl += g * probs;
                     for (Eigen::Index i = 0; i < n; ++i)
                       dl(i, gold[static_cast<std::size_t>(i)]) -= g;
                   });
}

// Row-wise layer normalisation with learned gain/offset (1xd each).
template <typename S>
Var<S> layernorm_rows(Var<S> x, Var<S> gamma, Var<S> beta, S eps = S(1e-5)) {
  Tape<S>& t = *x.tape;
  Eigen::Index n = x.rows(), d = x.cols();
  Mat<S> xhat(n, d);
  Vec<S> inv_sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S mu = x.value().row(i).mean();
    auto centered = x.value().row(i).array() - mu;
    S var = centered.square().mean();
    S is = S(1) / std::sqrt(var + eps);
    inv_sigma(i) = is;
    xhat.row(i) = (centered * is).matrix();
  }
  Mat<S> y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
             beta.value().row(0).array();
  int xi = x.id, gi = gamma.id, bi = beta.id;
  return t.emplace(std::move(y), [xi, gi, bi, xhat = std::move(xhat),
                                  inv_sigma = std::move(inv_sigma), d](Tape<S>& t, int yi) {
    const Mat<S>& g = t.grad(yi);
    t.grad(gi) += g.cwiseProduct(xhat).colwise().sum();
    t.grad(bi) += g.colwise().sum();
    Mat<S>& dx = t.grad(xi);
    const auto gamma_row = t.value(gi).row(0).array();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      auto gg = g.row(i).array() * gamma_row;
      S mean_gg = gg.mean();
      S mean_ggx = (gg * xhat.row(i).array()).mean();
      dx.row(i).array() +=
          inv_sigma(i) * (gg - mean_gg - xhat.row(i).array() * mean_ggx);
    }
    (void)d;
  });
}

template <typename S>
Var<S> operator+(Var<S> a, Var<S> b) { return add(a, b); }
template <typename S>
Var<S> operator-(Var<S> a, Var<S> b) { return sub(a, b); }

}  // namespace towe::ag

#endif
