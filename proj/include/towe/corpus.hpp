#ifndef TOWE_CORPUS_HPP
#define TOWE_CORPUS_HPP

#include <optional>
#include <string>
#include <vector>

#include "towe/common.hpp"

namespace towe {

inline constexpr int kRootHead = -1;

struct Token {
  int index = 0;
  std::string surface;
  std::string pos_tag;          // empty until parses are joined
  std::optional<int> head;      // 0-based head index, kRootHead for the root
};

// One (sentence, target) pair. A sentence with k targets yields k instances.
struct Instance {
  std::string sent_id;
  std::vector<Token> tokens;
  Span target_span;
  std::vector<BioTag> gold_labels;
  std::string split_id;

  int size() const { return static_cast<int>(tokens.size()); }
  bool has_parses() const {
    return !tokens.empty() && tokens.front().head.has_value();
  }
};

struct DatasetSplit {
  std::string name;
  std::vector<Instance> instances;
};

struct CorpusStats {
  long num_sentences = 0;
  double avg_sentence_length = 0;
  long num_aspect_terms = 0;
  long num_opinion_terms = 0;
  double avg_dependency_distance = 0;
  double avg_sequential_distance = 0;
  long num_distance_pairs = 0;  // (target, opinion span) pairs behind the averages
};

struct ParseRecord {
  std::vector<std::string> pos_tags;
  std::vector<int> heads;  // kRootHead marks the root
};

// Decode BIO labels into maximal spans. Total: a dangling I (no preceding
// B or I) opens a new span instead of being dropped.
std::vector<Span> bio_decode(const std::vector<BioTag>& labels);

// Inverse of bio_decode for disjoint, sorted-or-not span sets.
std::vector<BioTag> bio_encode(const std::vector<Span>& spans, int n);

// Throws AnnotationError on an I that follows O or sentence start.
void validate_bio(const std::vector<BioTag>& labels);

// One record of the inline-annotated distribution format: three parallel
// token streams, the latter two carrying \B \I \O suffixes. POS/heads stay
// unset for a later join_parses.
Instance import_inline_annotated(const std::string& sentence_line,
                                 const std::string& target_line,
                                 const std::string& opinion_line);

// Attaches POS tags and dependency heads; validates the single-root tree.
DatasetSplit join_parses(DatasetSplit split, const std::vector<ParseRecord>& parses);

CorpusStats compute_statistics(const DatasetSplit& split);

// Shortest path length between two tokens in the undirected head tree.
int tree_distance(const std::vector<int>& heads, int a, int b);

// The token whose head lies outside the span; falls back to the first token.
int span_head_token(const Instance& inst, const Span& span);

}  // namespace towe

#endif
