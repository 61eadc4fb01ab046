#ifndef TOWE_ENCODERS_HPP
#define TOWE_ENCODERS_HPP

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "towe/params.hpp"

namespace towe {

enum class EncoderKind { CNN, TRANSFORMER, BILSTM, ONLSTM };

inline std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::CNN: return "CNN";
    case EncoderKind::TRANSFORMER: return "Transformer";
    case EncoderKind::BILSTM: return "BiLSTM";
    default: return "ON-LSTM";
  }
}

inline EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "CNN" || s == "cnn") return EncoderKind::CNN;
  if (s == "Transformer" || s == "transformer") return EncoderKind::TRANSFORMER;
  if (s == "BiLSTM" || s == "bilstm") return EncoderKind::BILSTM;
  if (s == "ON-LSTM" || s == "onlstm" || s == "on-lstm") return EncoderKind::ONLSTM;
  throw ConfigError("unknown encoder kind '" + s + "'");
}

// hidden_dim is per direction for the recurrent encoders (output 2x), the
// total output width for the CNN, and the model width for the Transformer.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::BILSTM;
  int hidden_dim = 200;
  std::vector<int> cnn_filter_widths = {3, 4, 5};
  int transformer_layers = 2;
  int transformer_heads = 4;
  int transformer_ffn_dim = 400;
  int onlstm_chunk_factor = 10;

  int output_dim() const {
    switch (kind) {
      case EncoderKind::CNN: return hidden_dim;
      case EncoderKind::TRANSFORMER: return hidden_dim;
      default: return 2 * hidden_dim;
    }
  }

  void validate() const {
    if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
    if (kind == EncoderKind::CNN) {
      if (cnn_filter_widths.empty()) throw ConfigError("CNN needs filter widths");
      if (hidden_dim % static_cast<int>(cnn_filter_widths.size()) != 0)
        throw ConfigError("CNN hidden_dim must divide evenly across filter widths");
    }
    if (kind == EncoderKind::TRANSFORMER) {
      if (hidden_dim % transformer_heads != 0)
        throw ConfigError("transformer head count must divide hidden_dim");
      if (transformer_layers <= 0) throw ConfigError("transformer needs >= 1 layer");
    }
    if (kind == EncoderKind::ONLSTM && hidden_dim % onlstm_chunk_factor != 0)
      throw ConfigError("onlstm_chunk_factor must divide hidden_dim");
  }
};

inline EncoderConfig default_encoder_config(EncoderKind kind) {
  EncoderConfig c;
  c.kind = kind;
  c.hidden_dim = kind == EncoderKind::CNN ? 300 : 200;
  return c;
}

template <typename S>
struct Encoder {
  virtual ~Encoder() = default;
  virtual ag::Var<S> encode(ag::Tape<S>& tape, ag::Var<S> x) = 0;
  virtual int output_dim() const = 0;
};

// ---- CNN -------------------------------------------------------------------

// One convolution per filter width over zero-padded token windows; the per
// width feature vectors are concatenated.
template <typename S>
class CnnEncoder : public Encoder<S> {
 public:
  CnnEncoder(ag::ParameterCollection<S>& pc, const EncoderConfig& cfg, int input_dim,
             std::mt19937& rng)
      : cfg_(cfg) {
    cfg_.validate();
    const int per_width = cfg.hidden_dim / static_cast<int>(cfg.cnn_filter_widths.size());
    for (int w : cfg.cnn_filter_widths) {
      filters_.push_back(&pc.add("cnn_w" + std::to_string(w),
                                 xavier_uniform<S>(w * input_dim, per_width, rng)));
      biases_.push_back(&pc.add("cnn_b" + std::to_string(w), Mat<S>::Zero(1, per_width)));
    }
  }

  ag::Var<S> encode(ag::Tape<S>& tape, ag::Var<S> x) override {
    std::vector<ag::Var<S>> outs;
    for (std::size_t k = 0; k < filters_.size(); ++k) {
      int w = cfg_.cnn_filter_widths[k];
      std::vector<ag::Var<S>> window;
      for (int off = -(w - 1) / 2; off <= w / 2; ++off)
        window.push_back(ag::shift_rows(x, off));
      ag::Var<S> stacked = ag::concat_cols(window);
      outs.push_back(ag::relu(ag::add_rowvec(
          ag::matmul(stacked, ag::param(tape, *filters_[k])), ag::param(tape, *biases_[k]))));
    }
    return outs.size() == 1 ? outs[0] : ag::concat_cols(outs);
  }

  int output_dim() const override { return cfg_.hidden_dim; }

 private:
  EncoderConfig cfg_;
  std::vector<ag::Parameter<S>*> filters_;
  std::vector<ag::Parameter<S>*> biases_;
};

// ---- Transformer -----------------------------------------------------------

// Scaled dot-product attention; returns the weighted sum and optionally the
// attention matrix itself.
template <typename S>
ag::Var<S> scaled_dot_attention(ag::Tape<S>& tape, ag::Var<S> q, ag::Var<S> k,
                                ag::Var<S> v, std::vector<ag::Var<S>>* attn_out = nullptr) {
  S inv_sqrt_dk = S(1) / std::sqrt(static_cast<S>(k.cols()));
  ag::Var<S> scores = ag::scale(ag::matmul(q, ag::transpose(k)), inv_sqrt_dk);
  ag::Var<S> attn = ag::softmax_rows(scores);
  if (attn_out) attn_out->push_back(attn);
  (void)tape;
  return ag::matmul(attn, v);
}

template <typename S>
class TransformerEncoder : public Encoder<S> {
 public:
  TransformerEncoder(ag::ParameterCollection<S>& pc, const EncoderConfig& cfg,
                     int input_dim, std::mt19937& rng)
      : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg.hidden_dim;
    w_in_ = &pc.add("tf_in_w", xavier_uniform<S>(input_dim, d, rng));
    b_in_ = &pc.add("tf_in_b", Mat<S>::Zero(1, d));
    for (int l = 0; l < cfg.transformer_layers; ++l) {
      std::string p = "tf_l" + std::to_string(l) + "_";
      layers_.push_back(Layer{
          &pc.add(p + "wq", xavier_uniform<S>(d, d, rng)),
          &pc.add(p + "wk", xavier_uniform<S>(d, d, rng)),
          &pc.add(p + "wv", xavier_uniform<S>(d, d, rng)),
          &pc.add(p + "wo", xavier_uniform<S>(d, d, rng)),
          &pc.add(p + "bq", Mat<S>::Zero(1, d)),
          &pc.add(p + "bk", Mat<S>::Zero(1, d)),
          &pc.add(p + "bv", Mat<S>::Zero(1, d)),
          &pc.add(p + "bo", Mat<S>::Zero(1, d)),
          &pc.add(p + "ln1_g", Mat<S>::Ones(1, d)),
          &pc.add(p + "ln1_b", Mat<S>::Zero(1, d)),
          &pc.add(p + "ffn_w1", xavier_uniform<S>(d, cfg.transformer_ffn_dim, rng)),
          &pc.add(p + "ffn_b1", Mat<S>::Zero(1, cfg.transformer_ffn_dim)),
          &pc.add(p + "ffn_w2", xavier_uniform<S>(cfg.transformer_ffn_dim, d, rng)),
          &pc.add(p + "ffn_b2", Mat<S>::Zero(1, d)),
          &pc.add(p + "ln2_g", Mat<S>::Ones(1, d)),
          &pc.add(p + "ln2_b", Mat<S>::Zero(1, d)),
      });
    }
  }

  ag::Var<S> encode(ag::Tape<S>& tape, ag::Var<S> x) override {
    last_attention.clear();
    ag::Var<S> h = ag::add_rowvec(ag::matmul(x, ag::param(tape, *w_in_)),
                                  ag::param(tape, *b_in_));
    for (const Layer& L : layers_) {
      ag::Var<S> a = multi_head(tape, h, L);
      h = ag::layernorm_rows(ag::add(h, a), ag::param(tape, *L.ln1_g),
                             ag::param(tape, *L.ln1_b));
      ag::Var<S> f = ag::add_rowvec(
          ag::matmul(ag::relu(ag::add_rowvec(ag::matmul(h, ag::param(tape, *L.ffn_w1)),
                                             ag::param(tape, *L.ffn_b1))),
                     ag::param(tape, *L.ffn_w2)),
          ag::param(tape, *L.ffn_b2));
      h = ag::layernorm_rows(ag::add(h, f), ag::param(tape, *L.ln2_g),
                             ag::param(tape, *L.ln2_b));
    }
    return h;
  }

  int output_dim() const override { return cfg_.hidden_dim; }

  // Attention matrices from the most recent encode(), layer-major then head.
  std::vector<ag::Var<S>> last_attention;

 private:
  struct Layer {
    ag::Parameter<S>*wq, *wk, *wv, *wo, *bq, *bk, *bv, *bo;
    ag::Parameter<S>*ln1_g, *ln1_b;
    ag::Parameter<S>*ffn_w1, *ffn_b1, *ffn_w2, *ffn_b2;
    ag::Parameter<S>*ln2_g, *ln2_b;
  };

  ag::Var<S> multi_head(ag::Tape<S>& tape, ag::Var<S> h, const Layer& L) {
    const int d = cfg_.hidden_dim;
    const int heads = cfg_.transformer_heads;
    const int dk = d / heads;
    ag::Var<S> q = ag::add_rowvec(ag::matmul(h, ag::param(tape, *L.wq)), ag::param(tape, *L.bq));
    ag::Var<S> k = ag::add_rowvec(ag::matmul(h, ag::param(tape, *L.wk)), ag::param(tape, *L.bk));
    ag::Var<S> v = ag::add_rowvec(ag::matmul(h, ag::param(tape, *L.wv)), ag::param(tape, *L.bv));
    std::vector<ag::Var<S>> head_outs;
    for (int i = 0; i < heads; ++i) {
      head_outs.push_back(scaled_dot_attention(
          tape, ag::slice_cols(q, i * dk, dk), ag::slice_cols(k, i * dk, dk),
          ag::slice_cols(v, i * dk, dk), &last_attention));
    }
    ag::Var<S> cat = head_outs.size() == 1 ? head_outs[0] : ag::concat_cols(head_outs);
    return ag::add_rowvec(ag::matmul(cat, ag::param(tape, *L.wo)), ag::param(tape, *L.bo));
  }

  EncoderConfig cfg_;
  ag::Parameter<S>*w_in_, *b_in_;
  std::vector<Layer> layers_;
};

// ---- LSTM / BiLSTM -----------------------------------------------------------

// One direction of a standard LSTM; gate order in the packed weights is
// (input, forget, cell, output). Forget-gate bias starts at 1.
template <typename S>
struct LstmDirection {
  ag::Parameter<S>*wx, *wh, *b;
  int hidden;

  LstmDirection(ag::ParameterCollection<S>& pc, const std::string& name, int input_dim,
                int hidden_dim, std::mt19937& rng)
      : hidden(hidden_dim) {
    wx = &pc.add(name + "_wx", xavier_uniform<S>(input_dim, 4 * hidden_dim, rng));
    wh = &pc.add(name + "_wh", xavier_uniform<S>(hidden_dim, 4 * hidden_dim, rng));
    Mat<S> bias = Mat<S>::Zero(1, 4 * hidden_dim);
    bias.middleCols(hidden_dim, hidden_dim).setOnes();
    b = &pc.add(name + "_b", std::move(bias));
  }

  // Returns per-token hidden rows in input order.
  std::vector<ag::Var<S>> run(ag::Tape<S>& tape, ag::Var<S> x, bool reverse) const {
    const Eigen::Index n = x.rows();
    ag::Var<S> wx_n = ag::param(tape, *wx);
    ag::Var<S> wh_n = ag::param(tape, *wh);
    ag::Var<S> b_n = ag::param(tape, *b);
    ag::Var<S> h = tape.input(Mat<S>::Zero(1, hidden));
    ag::Var<S> c = tape.input(Mat<S>::Zero(1, hidden));
    std::vector<ag::Var<S>> states(static_cast<std::size_t>(n));
    for (Eigen::Index step = 0; step < n; ++step) {
      Eigen::Index t = reverse ? n - 1 - step : step;
      ag::Var<S> z = ag::add_rowvec(
          ag::add(ag::matmul(ag::row(x, t), wx_n), ag::matmul(h, wh_n)), b_n);
      ag::Var<S> i = ag::sigmoid(ag::slice_cols(z, 0, hidden));
      ag::Var<S> f = ag::sigmoid(ag::slice_cols(z, hidden, hidden));
      ag::Var<S> g = ag::tanh_(ag::slice_cols(z, 2 * hidden, hidden));
      ag::Var<S> o = ag::sigmoid(ag::slice_cols(z, 3 * hidden, hidden));
      c = ag::add(ag::cmul(f, c), ag::cmul(i, g));
      h = ag::cmul(o, ag::tanh_(c));
      states[static_cast<std::size_t>(t)] = h;
    }
    return states;
  }
};

template <typename S>
class BiLstmEncoder : public Encoder<S> {
 public:
  BiLstmEncoder(ag::ParameterCollection<S>& pc, const EncoderConfig& cfg, int input_dim,
                std::mt19937& rng)
      : cfg_(cfg),
        fwd_(pc, "bilstm_fwd", input_dim, cfg.hidden_dim, rng),
        bwd_(pc, "bilstm_bwd", input_dim, cfg.hidden_dim, rng) {
    cfg_.validate();
  }

  ag::Var<S> encode(ag::Tape<S>& tape, ag::Var<S> x) override {
    return ag::concat_cols<S>(
        {ag::vstack(fwd_.run(tape, x, false)), ag::vstack(bwd_.run(tape, x, true))});
  }

  int output_dim() const override { return 2 * cfg_.hidden_dim; }

 private:
  EncoderConfig cfg_;

 public:
  LstmDirection<S> fwd_, bwd_;  // exposed for the direction-symmetry test
};

// ---- ON-LSTM ------------------------------------------------------------------

// LSTM with cumax-driven master gates. Master gates are computed per chunk
// (hidden/chunk_factor of them) and expanded so each controls chunk_factor
// adjacent cells.
template <typename S>
struct OnLstmDirection {
  ag::Parameter<S>*wx, *wh, *b;
  int hidden;
  int chunk;

  OnLstmDirection(ag::ParameterCollection<S>& pc, const std::string& name, int input_dim,
                  int hidden_dim, int chunk_factor, std::mt19937& rng)
      : hidden(hidden_dim), chunk(chunk_factor) {
    const int m = hidden_dim / chunk_factor;
    wx = &pc.add(name + "_wx", xavier_uniform<S>(input_dim, 4 * hidden_dim + 2 * m, rng));
    wh = &pc.add(name + "_wh", xavier_uniform<S>(hidden_dim, 4 * hidden_dim + 2 * m, rng));
    Mat<S> bias = Mat<S>::Zero(1, 4 * hidden_dim + 2 * m);
    bias.middleCols(hidden_dim, hidden_dim).setOnes();
    b = &pc.add(name + "_b", std::move(bias));
  }

  std::vector<ag::Var<S>> run(ag::Tape<S>& tape, ag::Var<S> x, bool reverse) const {
    const Eigen::Index n = x.rows();
    const int m = hidden / chunk;
    ag::Var<S> wx_n = ag::param(tape, *wx);
    ag::Var<S> wh_n = ag::param(tape, *wh);
    ag::Var<S> b_n = ag::param(tape, *b);
    ag::Var<S> h = tape.input(Mat<S>::Zero(1, hidden));
    ag::Var<S> c = tape.input(Mat<S>::Zero(1, hidden));
    std::vector<ag::Var<S>> states(static_cast<std::size_t>(n));
    for (Eigen::Index step = 0; step < n; ++step) {
      Eigen::Index t = reverse ? n - 1 - step : step;
      ag::Var<S> z = ag::add_rowvec(
          ag::add(ag::matmul(ag::row(x, t), wx_n), ag::matmul(h, wh_n)), b_n);
      ag::Var<S> i = ag::sigmoid(ag::slice_cols(z, 0, hidden));
      ag::Var<S> f = ag::sigmoid(ag::slice_cols(z, hidden, hidden));
      ag::Var<S> g = ag::tanh_(ag::slice_cols(z, 2 * hidden, hidden));
      ag::Var<S> o = ag::sigmoid(ag::slice_cols(z, 3 * hidden, hidden));
      ag::Var<S> mf = ag::repeat_interleave_cols(
          ag::cumax_rows(ag::slice_cols(z, 4 * hidden, m)), chunk);
      ag::Var<S> mi = ag::repeat_interleave_cols(
          ag::one_minus(ag::cumax_rows(ag::slice_cols(z, 4 * hidden + m, m))), chunk);
      ag::Var<S> overlap = ag::cmul(mf, mi);
      ag::Var<S> f_hat = ag::add(ag::cmul(f, overlap), ag::sub(mf, overlap));
      ag::Var<S> i_hat = ag::add(ag::cmul(i, overlap), ag::sub(mi, overlap));
      c = ag::add(ag::cmul(f_hat, c), ag::cmul(i_hat, g));
      h = ag::cmul(o, ag::tanh_(c));
      states[static_cast<std::size_t>(t)] = h;
    }
    return states;
  }
};

template <typename S>
class OnLstmEncoder : public Encoder<S> {
 public:
  OnLstmEncoder(ag::ParameterCollection<S>& pc, const EncoderConfig& cfg, int input_dim,
                std::mt19937& rng)
      : cfg_(cfg),
        fwd_(pc, "onlstm_fwd", input_dim, cfg.hidden_dim, cfg.onlstm_chunk_factor, rng),
        bwd_(pc, "onlstm_bwd", input_dim, cfg.hidden_dim, cfg.onlstm_chunk_factor, rng) {
    cfg_.validate();
  }

  ag::Var<S> encode(ag::Tape<S>& tape, ag::Var<S> x) override {
    return ag::concat_cols<S>(
        {ag::vstack(fwd_.run(tape, x, false)), ag::vstack(bwd_.run(tape, x, true))});
  }

  int output_dim() const override { return 2 * cfg_.hidden_dim; }

 private:
  EncoderConfig cfg_;
  OnLstmDirection<S> fwd_, bwd_;
};

template <typename S>
std::unique_ptr<Encoder<S>> make_encoder(ag::ParameterCollection<S>& pc,
                                         const EncoderConfig& cfg, int input_dim,
                                         std::mt19937& rng) {
  cfg.validate();
  switch (cfg.kind) {
    case EncoderKind::CNN:
      return std::make_unique<CnnEncoder<S>>(pc, cfg, input_dim, rng);
    case EncoderKind::TRANSFORMER:
      return std::make_unique<TransformerEncoder<S>>(pc, cfg, input_dim, rng);
    case EncoderKind::BILSTM:
      return std::make_unique<BiLstmEncoder<S>>(pc, cfg, input_dim, rng);
    default:
      return std::make_unique<OnLstmEncoder<S>>(pc, cfg, input_dim, rng);
  }
}

}  // namespace towe

#endif
