#ifndef TOWE_MODEL_HPP
#define TOWE_MODEL_HPP

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "towe/encoders.hpp"
#include "towe/eval.hpp"
#include "towe/featurize.hpp"
#include "towe/gcn.hpp"

namespace towe {

struct ModelConfig {
  InputConfig input;
  EncoderConfig encoder;
  GcnConfig gcn;
  int num_labels = 3;

  void validate() const {
    input.validate();
    encoder.validate();
    gcn.validate();
    if (num_labels != 3) throw ConfigError("BIO labeling needs exactly 3 labels");
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double dev_fraction = 0.2;
  int patience = 0;       // epochs without dev improvement before stopping; 0 = off
  double clip_norm = 0;   // global-norm gradient ceiling; 0 = off

  void validate() const {
    if (learning_rate < 0) throw ConfigError("learning_rate must be non-negative");
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (dev_fraction <= 0 || dev_fraction >= 1)
      throw ConfigError("dev_fraction must lie in (0,1)");
  }
};

inline TrainConfig default_train_config(InputMode mode) {
  TrainConfig tc;
  if (mode == InputMode::G) {
    tc.learning_rate = 1e-3;
    tc.epochs = 100;
    tc.batch_size = 16;
  } else {
    tc.learning_rate = 1e-5;
    tc.epochs = 10;
    tc.batch_size = 6;
    tc.patience = 3;
  }
  return tc;
}

// Per-sentence contextual matrices keyed by sentence id (mode B input).
template <typename S>
using ContextualStore = std::unordered_map<std::string, Mat<S>>;

// Linear layer + row softmax over {B, I, O}.
template <typename S>
struct Classifier {
  ag::Parameter<S>*w, *b;

  Classifier(ag::ParameterCollection<S>& pc, int dim, int num_labels, std::mt19937& rng)
      : w(&pc.add("cls_w", xavier_uniform<S>(dim, num_labels, rng))),
        b(&pc.add("cls_b", Mat<S>::Zero(1, num_labels))) {}

  ag::Var<S> logits(ag::Tape<S>& tape, ag::Var<S> h) const {
    return ag::add_rowvec(ag::matmul(h, ag::param(tape, *w)), ag::param(tape, *b));
  }

  ag::Var<S> probs(ag::Tape<S>& tape, ag::Var<S> h) const {
    return ag::softmax_rows(logits(tape, h));
  }
};

// Mean over tokens of -log p(gold); the non-tape counterpart used for
// reporting and tests.
template <typename S>
double nll(const Mat<S>& probs, const std::vector<BioTag>& gold) {
  if (probs.rows() != static_cast<Eigen::Index>(gold.size()))
    throw DimensionError("nll: " + std::to_string(probs.rows()) + " rows vs " +
                         std::to_string(gold.size()) + " labels");
  double total = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    total -= std::log(static_cast<double>(probs(i, static_cast<int>(gold[static_cast<std::size_t>(i)]))));
  return total / static_cast<double>(probs.rows());
}

// Argmax with ties broken toward O, then B, then I.
template <typename S>
BioTag argmax_label(const Eigen::Ref<const Eigen::Matrix<S, 1, Eigen::Dynamic>>& row) {
  static constexpr BioTag order[] = {BioTag::O, BioTag::B, BioTag::I};
  BioTag best = order[0];
  for (BioTag t : {order[1], order[2]})
    if (row(static_cast<int>(t)) > row(static_cast<int>(best))) best = t;
  return best;
}

// featurize -> encoder -> optional GCN -> linear softmax.
template <typename S>
class ToweModel {
 public:
  ToweModel(ModelConfig cfg, Vocab vocab, Vocab tagset, std::uint64_t seed,
            const std::string& vectors_path = "",
            const Mat<S>* word_table_override = nullptr)
      : cfg_(std::move(cfg)), init_seed_(seed) {
    cfg_.validate();
    std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
    if (word_table_override != nullptr && cfg_.input.mode == InputMode::G) {
      features_ = make_feature_set<S>(pc_, cfg_.input, std::move(vocab),
                                      std::move(tagset), rng, "");
      features_.word_table->value = *word_table_override;
    } else {
      features_ = make_feature_set<S>(pc_, cfg_.input, std::move(vocab),
                                      std::move(tagset), rng, vectors_path);
    }
    encoder_ = make_encoder<S>(pc_, cfg_.encoder, cfg_.input.feature_dim(), rng);
    gcn_ = std::make_unique<GcnStack<S>>(pc_, cfg_.gcn, cfg_.encoder.output_dim(), rng);
    classifier_ = std::make_unique<Classifier<S>>(pc_, cfg_.encoder.output_dim(),
                                                  cfg_.num_labels, rng);
  }

  ag::Var<S> logits(ag::Tape<S>& tape, const Instance& inst, bool training,
                    std::mt19937* dropout_rng, const Mat<S>* contextual) {
    if (gcn_->enabled() && !inst.has_parses())
      throw PreconditionError("GCN model needs dependency heads; instance " +
                              inst.sent_id + " has none");
    static std::mt19937 unused_rng;
    ag::Var<S> x = build_features<S>(tape, features_, inst, training,
                                     dropout_rng ? *dropout_rng : unused_rng, contextual);
    ag::Var<S> h = encoder_->encode(tape, x);
    if (gcn_->enabled()) h = gcn_->apply(tape, h, build_adjacency<S>(inst));
    return classifier_->logits(tape, h);
  }

  // Inference-time probability matrix, rows summing to 1.
  Mat<S> classify(const Instance& inst, const Mat<S>* contextual = nullptr) {
    ag::Tape<S> tape;
    ag::Var<S> l = logits(tape, inst, false, nullptr, contextual);
    return ag::softmax_rows(l).value();
  }

  std::vector<BioTag> predict(const Instance& inst, const Mat<S>* contextual = nullptr) {
    if (cfg_.input.mode == InputMode::B && contextual == nullptr)
      throw InferenceError("mode B prediction needs contextual vectors for sentence " +
                           inst.sent_id);
    Mat<S> probs = classify(inst, contextual);
    std::vector<BioTag> labels(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      Eigen::Matrix<S, 1, Eigen::Dynamic> row = probs.row(i);
      labels[static_cast<std::size_t>(i)] = argmax_label<S>(row);
    }
    return labels;
  }

  std::vector<Span> predict_spans(const Instance& inst, const Mat<S>* contextual = nullptr) {
    return bio_decode(predict(inst, contextual));
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return features_.vocab; }
  const Vocab& tagset() const { return features_.tagset; }
  std::uint64_t init_seed() const { return init_seed_; }
  ag::ParameterCollection<S>& params() { return pc_; }
  const ag::ParameterCollection<S>& params() const { return pc_; }
  Encoder<S>& encoder() { return *encoder_; }

 private:
  ModelConfig cfg_;
  std::uint64_t init_seed_;
  ag::ParameterCollection<S> pc_;
  FeatureSet<S> features_;
  std::unique_ptr<Encoder<S>> encoder_;
  std::unique_ptr<GcnStack<S>> gcn_;
  std::unique_ptr<Classifier<S>> classifier_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double dev_f1 = 0;
};

struct TrainResult {
  std::vector<EpochLog> curve;
  int best_epoch = -1;
  double best_dev_f1 = 0;
  int epochs_run = 0;
};

namespace detail {

template <typename S>
const Mat<S>* lookup_contextual(const ContextualStore<S>* store, const Instance& inst,
                                InputMode mode) {
  if (mode != InputMode::B) return nullptr;
  if (store == nullptr)
    throw InferenceError("mode B needs a contextual sidecar");
  auto it = store->find(inst.sent_id);
  if (it == store->end())
    throw InferenceError("contextual sidecar has no entry for sentence " + inst.sent_id);
  return &it->second;
}

}  // namespace detail

// Minibatch Adam with a seeded dev carve-out; keeps the parameters of the
// best dev-F1 epoch.
template <typename S>
TrainResult train(ToweModel<S>& model, const DatasetSplit& split, const TrainConfig& tc,
                  const ContextualStore<S>* contextual = nullptr) {
  tc.validate();
  if (split.instances.empty()) throw PreconditionError("training split is empty");
  const InputMode mode = model.config().input.mode;
  // Fail before any compute if sidecar coverage is incomplete.
  for (const Instance& inst : split.instances)
    detail::lookup_contextual<S>(contextual, inst, mode);

  std::mt19937 rng(static_cast<std::mt19937::result_type>(tc.seed));
  const std::size_t n = split.instances.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  const auto dev_count = static_cast<std::size_t>(tc.dev_fraction * static_cast<double>(n));
  std::vector<std::size_t> dev_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_count));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(dev_count), order.end());
  if (train_idx.empty()) throw PreconditionError("dev carve-out leaves no training data");

  std::vector<std::vector<Span>> dev_gold;
  dev_gold.reserve(dev_idx.size());
  for (std::size_t i : dev_idx) dev_gold.push_back(bio_decode(split.instances[i].gold_labels));

  ag::Adam<S> adam;
  adam.lr = static_cast<S>(tc.learning_rate);
  adam.clip_norm = static_cast<S>(tc.clip_norm);

  TrainResult result;
  std::vector<Mat<S>> best_values = model.params().snapshot_values();
  int since_best = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0;
    long token_sum = 0;
    for (std::size_t at = 0; at < train_idx.size(); at += static_cast<std::size_t>(tc.batch_size)) {
      std::size_t batch_end = std::min(train_idx.size(), at + static_cast<std::size_t>(tc.batch_size));
      ag::Tape<S> tape;
      long batch_tokens = 0;
      for (std::size_t k = at; k < batch_end; ++k)
        batch_tokens += split.instances[train_idx[k]].size();
      ag::Var<S> batch_loss{};
      for (std::size_t k = at; k < batch_end; ++k) {
        const Instance& inst = split.instances[train_idx[k]];
        const Mat<S>* ctx = detail::lookup_contextual<S>(contextual, inst, mode);
        ag::Var<S> l = model.logits(tape, inst, true, &rng, ctx);
        std::vector<int> gold(inst.gold_labels.size());
        for (std::size_t i = 0; i < gold.size(); ++i)
          gold[i] = static_cast<int>(inst.gold_labels[i]);
        ag::Var<S> ce = ag::cross_entropy_rows(l, std::move(gold));
        // token-weighted so the batch loss is the mean over all its tokens
        ag::Var<S> w = ag::scale(ce, static_cast<S>(inst.size()) / static_cast<S>(batch_tokens));
        batch_loss = (k == at) ? w : ag::add(batch_loss, w);
      }
      double loss_val = static_cast<double>(batch_loss.value()(0, 0));
      if (!std::isfinite(loss_val))
        throw Error("non-finite loss at epoch " + std::to_string(epoch) +
                    "; check learning rate and initialisation");
      loss_sum += loss_val * static_cast<double>(batch_tokens);
      token_sum += batch_tokens;
      model.params().zero_grads();
      tape.backward(batch_loss);
      adam.step(model.params());
    }

    double dev_f1 = 0;
    if (!dev_idx.empty()) {
      std::vector<std::vector<Span>> dev_pred;
      dev_pred.reserve(dev_idx.size());
      for (std::size_t i : dev_idx) {
        const Instance& inst = split.instances[i];
        dev_pred.push_back(
            model.predict_spans(inst, detail::lookup_contextual<S>(contextual, inst, mode)));
      }
      dev_f1 = score(dev_pred, dev_gold).f1;
    }

    result.curve.push_back(
        EpochLog{epoch, loss_sum / static_cast<double>(std::max(1l, token_sum)), dev_f1});
    result.epochs_run = epoch;

    if (dev_idx.empty() || dev_f1 > result.best_dev_f1 || result.best_epoch < 0) {
      result.best_dev_f1 = dev_f1;
      result.best_epoch = epoch;
      best_values = model.params().snapshot_values();
      since_best = 0;
    } else if (tc.patience > 0 && ++since_best >= tc.patience) {
      break;
    }
  }

  model.params().restore_values(best_values);
  return result;
}

// Everything needed to rebuild a model and reproduce its predictions.
template <typename S>
struct Checkpoint {
  int version = 1;
  ModelConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> vocab_words;
  std::vector<std::string> tagset_words;
  std::vector<std::pair<std::string, Mat<S>>> tensors;

  std::uint64_t vocab_hash() const { return fnv1a(vocab_words); }
  std::uint64_t tagset_hash() const { return fnv1a(tagset_words); }
};

template <typename S>
Checkpoint<S> make_checkpoint(const ToweModel<S>& model) {
  Checkpoint<S> ck;
  ck.config = model.config();
  ck.seed = model.init_seed();
  ck.vocab_words = model.vocab().words();
  ck.tagset_words = model.tagset().words();
  for (const auto& p : model.params()) ck.tensors.emplace_back(p.name, p.value);
  return ck;
}

template <typename S>
ToweModel<S> model_from_checkpoint(const Checkpoint<S>& ck) {
  ToweModel<S> model(ck.config, Vocab::from_words(ck.vocab_words),
                     Vocab::from_words(ck.tagset_words), ck.seed);
  std::unordered_map<std::string, const Mat<S>*> by_name;
  for (const auto& [name, mat] : ck.tensors) by_name[name] = &mat;
  for (auto& p : model.params()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw LoadError("checkpoint is missing tensor '" + p.name + "'");
    if (it->second->rows() != p.value.rows() || it->second->cols() != p.value.cols())
      throw LoadError("checkpoint tensor '" + p.name + "' has wrong shape");
    p.value = *it->second;
  }
  return model;
}

}  // namespace towe

#endif
