#ifndef TOWE_TESTS_TESTUTIL_HPP
#define TOWE_TESTS_TESTUTIL_HPP

#include <random>
#include <string>
#include <vector>

#include "towe/corpus.hpp"

namespace towe::testing {

inline std::vector<BioTag> labels_from(const std::string& s) {
  std::vector<BioTag> out;
  out.reserve(s.size());
  for (char c : s) out.push_back(bio_from_char(c));
  return out;
}

inline std::string labels_to(const std::vector<BioTag>& labels) {
  std::string out;
  for (BioTag t : labels) out.push_back(bio_char(t));
  return out;
}

// Instance with chain parses (token i headed by i-1, token 0 the root) and a
// cycling POS tagset.
inline Instance chain_instance(int n, Span target, const std::vector<Span>& opinions,
                               const std::string& sent_id = "s0") {
  static const char* tags[] = {"DT", "NN", "VB", "JJ"};
  Instance inst;
  inst.sent_id = sent_id;
  for (int i = 0; i < n; ++i)
    inst.tokens.push_back(
        Token{i, "w" + std::to_string(i), tags[i % 4], i == 0 ? kRootHead : i - 1});
  inst.target_span = target;
  inst.gold_labels = bio_encode(opinions, n);
  return inst;
}

// The running two-target example sentence: one instance per target.
inline std::vector<Instance> example_pair() {
  const std::vector<std::string> words = {"The",     "food", "is",        "good", "but",
                                          "the",     "service", "is",     "extremely",
                                          "slow"};
  const std::vector<std::string> tags = {"DT", "NN", "VBZ", "JJ", "CC",
                                         "DT", "NN", "VBZ", "RB", "JJ"};
  // a plausible small tree rooted at "good", with "slow" heading the second clause
  const std::vector<int> heads = {1, 3, 3, -1, 9, 6, 9, 9, 9, 3};
  auto build = [&](Span target, const std::vector<Span>& ops, const std::string& id) {
    Instance inst;
    inst.sent_id = id;
    for (std::size_t i = 0; i < words.size(); ++i)
      inst.tokens.push_back(Token{static_cast<int>(i), words[i], tags[i], heads[i]});
    inst.target_span = target;
    inst.gold_labels = bio_encode(ops, static_cast<int>(words.size()));
    return inst;
  };
  return {build({1, 2}, {{3, 4}}, "ex0"),        // target "food",    opinion "good"
          build({6, 7}, {{8, 10}}, "ex0")};      // target "service", opinion "extremely slow"
}

// Corpus where the opinion word is always the token right after the target;
// solvable from position information alone since surfaces are random.
inline DatasetSplit positional_corpus(int num_instances, std::uint64_t seed,
                                      int vocab_size = 20, int min_len = 7,
                                      int max_len = 11) {
  static const char* tags[] = {"DT", "NN", "VB", "JJ", "RB"};
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  DatasetSplit split;
  split.name = "synthetic";
  for (int k = 0; k < num_instances; ++k) {
    std::uniform_int_distribution<int> len_dist(min_len, max_len);
    const int n = len_dist(rng);
    std::uniform_int_distribution<int> pos_dist(0, n - 2);
    const int t = pos_dist(rng);
    Instance inst;
    inst.sent_id = "syn" + std::to_string(k);
    std::uniform_int_distribution<int> word_dist(0, vocab_size - 1);
    for (int i = 0; i < n; ++i)
      inst.tokens.push_back(Token{i, "w" + std::to_string(word_dist(rng)),
                                  tags[i % 5], i == 0 ? kRootHead : i - 1});
    inst.target_span = {t, t + 1};
    inst.gold_labels = bio_encode({{t + 1, t + 2}}, n);
    split.instances.push_back(std::move(inst));
  }
  return split;
}

inline std::vector<std::vector<Span>> gold_spans(const DatasetSplit& split) {
  std::vector<std::vector<Span>> out;
  out.reserve(split.instances.size());
  for (const Instance& inst : split.instances) out.push_back(bio_decode(inst.gold_labels));
  return out;
}

}  // namespace towe::testing

#endif
