#ifndef TOWE_GCN_HPP
#define TOWE_GCN_HPP

#include <random>
#include <string>
#include <vector>

#include "towe/corpus.hpp"
#include "towe/params.hpp"

namespace towe {

struct GcnConfig {
  int num_layers = 0;        // 0 disables the GCN entirely
  bool normalize = false;    // optional symmetric degree normalisation

  void validate() const {
    if (num_layers < 0) throw ConfigError("GCN layer count must be >= 0");
  }
};

// Undirected dependency connectivity with forced self-loops.
template <typename S>
Mat<S> build_adjacency(const Instance& inst) {
  if (!inst.has_parses())
    throw PreconditionError("instance " + inst.sent_id +
                            " has no dependency heads; join_parses first");
  const int n = inst.size();
  Mat<S> a = Mat<S>::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    int h = *inst.tokens[static_cast<std::size_t>(i)].head;
    if (h == kRootHead) continue;
    a(i, h) = S(1);
    a(h, i) = S(1);
  }
  return a;
}

// D^{-1/2} A D^{-1/2}
template <typename S>
Mat<S> normalize_adjacency(Mat<S> a) {
  Vec<S> inv_sqrt_deg = a.rowwise().sum().array().sqrt().inverse().matrix();
  return inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
}

// H' = ReLU(A H W) + H
template <typename S>
ag::Var<S> gcn_layer(ag::Tape<S>& tape, ag::Var<S> h, ag::Var<S> a, ag::Var<S> w) {
  if (a.rows() != h.rows() || a.cols() != h.rows() || w.rows() != h.cols() ||
      w.cols() != h.cols())
    throw DimensionError("gcn_layer: incompatible shapes A " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         ", H " + std::to_string(h.rows()) + "x" +
                         std::to_string(h.cols()) + ", W " + std::to_string(w.rows()) +
                         "x" + std::to_string(w.cols()));
  (void)tape;
  return ag::add(ag::relu(ag::matmul(ag::matmul(a, h), w)), h);
}

template <typename S>
class GcnStack {
 public:
  GcnStack(ag::ParameterCollection<S>& pc, const GcnConfig& cfg, int dim,
           std::mt19937& rng)
      : cfg_(cfg) {
    cfg_.validate();
    for (int k = 0; k < cfg.num_layers; ++k)
      weights_.push_back(
          &pc.add("gcn_w" + std::to_string(k), xavier_uniform<S>(dim, dim, rng)));
  }

  bool enabled() const { return !weights_.empty(); }

  ag::Var<S> apply(ag::Tape<S>& tape, ag::Var<S> h0, const Mat<S>& adjacency) const {
    if (weights_.empty()) return h0;
    Mat<S> a = cfg_.normalize ? normalize_adjacency<S>(adjacency) : adjacency;
    ag::Var<S> a_node = tape.input(std::move(a));
    ag::Var<S> h = h0;
    for (ag::Parameter<S>* w : weights_)
      h = gcn_layer(tape, h, a_node, ag::param(tape, *w));
    return h;
  }

 private:
  GcnConfig cfg_;
  std::vector<ag::Parameter<S>*> weights_;
};

}  // namespace towe

#endif
