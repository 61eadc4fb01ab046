#ifndef TOWE_FEATURIZE_HPP
#define TOWE_FEATURIZE_HPP

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "towe/corpus.hpp"
#include "towe/params.hpp"

namespace towe {

enum class InputMode { G, B };

inline std::string to_string(InputMode m) { return m == InputMode::G ? "G" : "B"; }

// Which embedding channels are active and how wide they are. In mode B the
// word channel is a per-token contextual matrix read from a sidecar file and
// word_dim names its width.
struct InputConfig {
  InputMode mode = InputMode::G;
  bool use_posn = true;
  bool use_post = true;
  int word_dim = 300;
  int posn_dim = 30;
  int post_dim = 30;
  double dropout_rate = 0.8;
  int max_distance = 100;
  bool train_word_embeddings = false;

  int feature_dim() const {
    int d = word_dim;
    if (use_posn) d += posn_dim;
    if (mode == InputMode::G && use_post) d += post_dim;
    return d;
  }

  void validate() const {
    if (mode == InputMode::B && use_post)
      throw ConfigError("POS-tag embeddings are not available in mode B");
    if (word_dim <= 0 || posn_dim <= 0 || post_dim <= 0)
      throw ConfigError("embedding dimensions must be positive");
    if (dropout_rate < 0 || dropout_rate >= 1)
      throw ConfigError("dropout_rate must lie in [0,1)");
    if (max_distance <= 0) throw ConfigError("max_distance must be positive");
  }
};

class Vocab {
 public:
  static constexpr const char* kUnk = "<unk>";

  Vocab() { add(kUnk); }

  int add(const std::string& w) {
    auto [it, inserted] = index_.emplace(w, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }

  int lookup(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? 0 : it->second;
  }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  std::uint64_t hash() const { return fnv1a(words_); }

  static Vocab from_words(const std::vector<std::string>& words) {
    Vocab v;
    for (const auto& w : words)
      if (w != kUnk) v.add(w);
    return v;
  }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> words_;
};

inline Vocab build_vocab(const DatasetSplit& split) {
  Vocab v;
  for (const Instance& inst : split.instances)
    for (const Token& t : inst.tokens) v.add(t.surface);
  return v;
}

inline Vocab build_tagset(const DatasetSplit& split) {
  Vocab v;
  for (const Instance& inst : split.instances)
    for (const Token& t : inst.tokens)
      if (!t.pos_tag.empty()) v.add(t.pos_tag);
  return v;
}

// Signed distance from each token to the target span: 0 inside the span,
// distance to the nearest span boundary token outside it.
inline std::vector<int> relative_distances(int n, const Span& span) {
  std::vector<int> d(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (span.contains(i))
      d[static_cast<std::size_t>(i)] = 0;
    else if (i < span.start)
      d[static_cast<std::size_t>(i)] = i - span.start;
    else
      d[static_cast<std::size_t>(i)] = i - (span.end - 1);
  }
  return d;
}

inline int clamp_distance(int d, int max_distance) {
  return std::clamp(d, -max_distance, max_distance) + max_distance;
}

// Word-vector text file: each line is "word f1 ... fd". The trailing d fields
// must parse as floats; anything before them is the key, which tolerates the
// odd multi-token key found in distributed vector files. Words missing from
// the file (and <unk>) share one random vector in [-0.25, 0.25].
template <typename S>
Mat<S> load_pretrained_vectors(const std::string& path, const Vocab& vocab,
                               std::mt19937& rng, int expect_dim = 0) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open word-vector file: " + path);

  auto lowercase = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  std::unordered_map<std::string, int> wanted;  // file key -> hit count guard
  for (const std::string& w : vocab.words()) {
    wanted.emplace(w, 0);
    wanted.emplace(lowercase(w), 0);
  }

  int dim = expect_dim;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::vector<double>> found;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    std::string f;
    while (ls >> f) fields.push_back(f);
    if (line_no == 1 && fields.size() == 2) continue;  // word2vec-style header
    if (dim == 0) dim = static_cast<int>(fields.size()) - 1;
    if (static_cast<int>(fields.size()) < dim + 1)
      throw LoadError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(dim) + " values, got " +
                      std::to_string(fields.size() - 1));
    std::string word = fields[0];
    for (std::size_t i = 1; i + static_cast<std::size_t>(dim) < fields.size(); ++i)
      word += " " + fields[i];
    if (!wanted.count(word)) continue;
    std::vector<double> vals(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      const std::string& v = fields[fields.size() - static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)];
      try {
        std::size_t used = 0;
        vals[static_cast<std::size_t>(j)] = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw LoadError(path + ":" + std::to_string(line_no) +
                        ": value '" + v + "' is not a number");
      }
    }
    found.emplace(std::move(word), std::move(vals));
  }
  if (dim == 0) throw LoadError(path + ": no vector rows found");
  if (found.empty())
    std::cerr << "warning: no overlap between vocabulary and " << path << "\n";

  std::uniform_real_distribution<double> oov_dist(-0.25, 0.25);
  Vec<S> oov(dim);
  for (int j = 0; j < dim; ++j) oov(j) = static_cast<S>(oov_dist(rng));

  Mat<S> table(vocab.size(), dim);
  for (int i = 0; i < vocab.size(); ++i) {
    const std::string& w = vocab.words()[static_cast<std::size_t>(i)];
    auto it = found.find(w);
    if (it == found.end()) it = found.find(lowercase(w));
    if (it == found.end()) {
      table.row(i) = oov.transpose();
    } else {
      for (int j = 0; j < dim; ++j)
        table(i, j) = static_cast<S>(it->second[static_cast<std::size_t>(j)]);
    }
  }
  if (!table.allFinite())
    throw LoadError(path + ": word vectors contain non-finite values");
  return table;
}

// Embedding tables plus the vocabularies that index them.
template <typename S>
struct FeatureSet {
  InputConfig config;
  Vocab vocab;
  Vocab tagset;
  ag::Parameter<S>* word_table = nullptr;
  ag::Parameter<S>* posn_table = nullptr;
  ag::Parameter<S>* post_table = nullptr;
};

template <typename S>
FeatureSet<S> make_feature_set(ag::ParameterCollection<S>& pc, const InputConfig& cfg,
                               Vocab vocab, Vocab tagset, std::mt19937& rng,
                               const std::string& vectors_path = "") {
  cfg.validate();
  FeatureSet<S> fs;
  fs.config = cfg;
  fs.vocab = std::move(vocab);
  fs.tagset = std::move(tagset);
  if (cfg.mode == InputMode::G) {
    Mat<S> table = vectors_path.empty()
                       ? uniform_init<S>(fs.vocab.size(), cfg.word_dim, -0.25, 0.25, rng)
                       : load_pretrained_vectors<S>(vectors_path, fs.vocab, rng, cfg.word_dim);
    if (table.cols() != cfg.word_dim)
      throw LoadError("word vectors have dim " + std::to_string(table.cols()) +
                      ", config says " + std::to_string(cfg.word_dim));
    fs.word_table = &pc.add("word_table", std::move(table), cfg.train_word_embeddings);
  }
  if (cfg.use_posn)
    fs.posn_table = &pc.add(
        "posn_table", xavier_uniform<S>(2 * cfg.max_distance + 1, cfg.posn_dim, rng));
  if (cfg.mode == InputMode::G && cfg.use_post)
    fs.post_table =
        &pc.add("post_table", xavier_uniform<S>(fs.tagset.size(), cfg.post_dim, rng));
  return fs;
}

// Per-token input matrix: concatenation of the active channels, with inverted
// dropout on the rows during training.
template <typename S>
ag::Var<S> build_features(ag::Tape<S>& tape, const FeatureSet<S>& fs,
                          const Instance& inst, bool training, std::mt19937& rng,
                          const Mat<S>* contextual = nullptr) {
  const InputConfig& cfg = fs.config;
  const int n = inst.size();
  std::vector<ag::Var<S>> channels;

  if (cfg.mode == InputMode::B) {
    if (contextual == nullptr)
      throw FeatureError("mode B requires a contextual matrix for sentence " + inst.sent_id);
    if (contextual->rows() != n)
      throw FeatureError("contextual matrix for sentence " + inst.sent_id + " has " +
                         std::to_string(contextual->rows()) + " rows, sentence has " +
                         std::to_string(n) + " tokens");
    if (contextual->cols() != cfg.word_dim)
      throw FeatureError("contextual matrix width " + std::to_string(contextual->cols()) +
                         " does not match configured word_dim " +
                         std::to_string(cfg.word_dim));
    channels.push_back(tape.input(*contextual));
  } else {
    if (fs.word_table == nullptr) throw ConfigError("word table missing");
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      ids[static_cast<std::size_t>(i)] = fs.vocab.lookup(inst.tokens[static_cast<std::size_t>(i)].surface);
    channels.push_back(ag::gather_rows(ag::param(tape, *fs.word_table), std::move(ids)));
  }

  if (cfg.mode == InputMode::G && cfg.use_post) {
    if (fs.post_table == nullptr) throw ConfigError("POS-tag table missing");
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      ids[static_cast<std::size_t>(i)] = fs.tagset.lookup(inst.tokens[static_cast<std::size_t>(i)].pos_tag);
    channels.push_back(ag::gather_rows(ag::param(tape, *fs.post_table), std::move(ids)));
  }

  if (cfg.use_posn) {
    if (fs.posn_table == nullptr) throw ConfigError("position table missing");
    std::vector<int> ids(static_cast<std::size_t>(n));
    auto dists = relative_distances(n, inst.target_span);
    for (int i = 0; i < n; ++i)
      ids[static_cast<std::size_t>(i)] =
          clamp_distance(dists[static_cast<std::size_t>(i)], cfg.max_distance);
    channels.push_back(ag::gather_rows(ag::param(tape, *fs.posn_table), std::move(ids)));
  }

  ag::Var<S> x = channels.size() == 1 ? channels[0] : ag::concat_cols(channels);

  if (training && cfg.dropout_rate > 0) {
    std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
    S inv_keep = static_cast<S>(1.0 / (1.0 - cfg.dropout_rate));
    Mat<S> mask(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        mask(i, j) = keep(rng) ? inv_keep : S(0);
    x = ag::cmul(x, tape.input(std::move(mask)));
  }
  return x;
}

}  // namespace towe

#endif
