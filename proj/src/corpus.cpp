#include "towe/corpus.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace towe {

std::vector<Span> bio_decode(const std::vector<BioTag>& labels) {
  std::vector<Span> spans;
  int start = -1;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    switch (labels[i]) {
      case BioTag::B:
        if (start >= 0) spans.push_back({start, i});
        start = i;
        break;
      case BioTag::I:
        if (start < 0) start = i;  // dangling I opens a new span
        break;
      case BioTag::O:
        if (start >= 0) spans.push_back({start, i});
        start = -1;
        break;
    }
  }
  if (start >= 0) spans.push_back({start, static_cast<int>(labels.size())});
  return spans;
}

std::vector<BioTag> bio_encode(const std::vector<Span>& spans, int n) {
  std::vector<BioTag> labels(static_cast<std::size_t>(n), BioTag::O);
  for (const Span& s : spans) {
    if (s.start < 0 || s.end > n || s.start >= s.end)
      throw AnnotationError("span [" + std::to_string(s.start) + "," +
                            std::to_string(s.end) + ") out of range for n=" +
                            std::to_string(n));
    labels[static_cast<std::size_t>(s.start)] = BioTag::B;
    for (int i = s.start + 1; i < s.end; ++i)
      labels[static_cast<std::size_t>(i)] = BioTag::I;
  }
  return labels;
}

void validate_bio(const std::vector<BioTag>& labels) {
  BioTag prev = BioTag::O;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == BioTag::I && prev == BioTag::O)
      throw AnnotationError("I tag at token " + std::to_string(i) +
                            " not preceded by B or I");
    prev = labels[i];
  }
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// "good\B" -> {"good", 'B'}. The final backslash separates surface from tag.
std::pair<std::string, char> split_tagged(const std::string& field,
                                          const std::string& which, std::size_t idx) {
  auto pos = field.rfind('\\');
  if (pos == std::string::npos || pos + 2 != field.size())
    throw FormatError(which + " line: token " + std::to_string(idx) +
                      " ('" + field + "') lacks a \\B \\I \\O suffix");
  char tag = field[pos + 1];
  if (tag != 'B' && tag != 'I' && tag != 'O')
    throw FormatError(which + " line: token " + std::to_string(idx) +
                      " has invalid tag '" + tag + "'");
  return {field.substr(0, pos), tag};
}

}  // namespace

Instance import_inline_annotated(const std::string& sentence_line,
                                 const std::string& target_line,
                                 const std::string& opinion_line) {
  auto words = split_ws(sentence_line);
  auto target_fields = split_ws(target_line);
  auto opinion_fields = split_ws(opinion_line);
  if (words.empty()) throw FormatError("sentence line is empty");
  if (target_fields.size() != words.size())
    throw FormatError("target line has " + std::to_string(target_fields.size()) +
                      " tokens, sentence has " + std::to_string(words.size()));
  if (opinion_fields.size() != words.size())
    throw FormatError("opinion line has " + std::to_string(opinion_fields.size()) +
                      " tokens, sentence has " + std::to_string(words.size()));

  Instance inst;
  inst.tokens.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i)
    inst.tokens.push_back(Token{static_cast<int>(i), words[i], "", std::nullopt});

  // Target span: one contiguous B I* block.
  int start = -1, end = -1;
  for (std::size_t i = 0; i < target_fields.size(); ++i) {
    auto [surface, tag] = split_tagged(target_fields[i], "target", i);
    (void)surface;
    if (tag == 'B') {
      if (start >= 0)
        throw AnnotationError("target line marks more than one span (second B at token " +
                              std::to_string(i) + ")");
      start = static_cast<int>(i);
      end = start + 1;
    } else if (tag == 'I') {
      if (end != static_cast<int>(i))
        throw AnnotationError("non-contiguous target at token " + std::to_string(i));
      ++end;
    }
  }
  if (start < 0) throw AnnotationError("target line marks no span");
  inst.target_span = {start, end};

  inst.gold_labels.reserve(words.size());
  for (std::size_t i = 0; i < opinion_fields.size(); ++i) {
    auto [surface, tag] = split_tagged(opinion_fields[i], "opinion", i);
    (void)surface;
    inst.gold_labels.push_back(bio_from_char(tag));
  }
  validate_bio(inst.gold_labels);
  for (int i = inst.target_span.start; i < inst.target_span.end; ++i)
    if (inst.gold_labels[static_cast<std::size_t>(i)] != BioTag::O)
      throw AnnotationError("target token " + std::to_string(i) +
                            " carries a non-O opinion tag");
  return inst;
}

DatasetSplit join_parses(DatasetSplit split, const std::vector<ParseRecord>& parses) {
  if (parses.size() != split.instances.size())
    throw JoinError("parse record count " + std::to_string(parses.size()) +
                    " does not match instance count " +
                    std::to_string(split.instances.size()));
  for (std::size_t k = 0; k < parses.size(); ++k) {
    Instance& inst = split.instances[k];
    const ParseRecord& rec = parses[k];
    const std::string id = inst.sent_id.empty() ? std::to_string(k) : inst.sent_id;
    if (rec.pos_tags.size() != inst.tokens.size() ||
        rec.heads.size() != inst.tokens.size())
      throw JoinError("sentence " + id + ": parse record length " +
                      std::to_string(rec.heads.size()) + " vs " +
                      std::to_string(inst.tokens.size()) + " tokens");

    int roots = 0;
    for (std::size_t i = 0; i < rec.heads.size(); ++i) {
      int h = rec.heads[i];
      if (h == kRootHead) {
        ++roots;
      } else if (h < 0 || h >= static_cast<int>(rec.heads.size())) {
        throw TreeError("sentence " + id + ": head index " + std::to_string(h) +
                        " out of range at token " + std::to_string(i));
      } else if (h == static_cast<int>(i)) {
        throw TreeError("sentence " + id + ": token " + std::to_string(i) +
                        " is its own head");
      }
    }
    if (roots != 1)
      throw TreeError("sentence " + id + ": expected exactly one root, found " +
                      std::to_string(roots));
    // Acyclic check: every token must reach the root in <= n steps.
    const int n = static_cast<int>(rec.heads.size());
    for (int i = 0; i < n; ++i) {
      int cur = i, steps = 0;
      while (rec.heads[static_cast<std::size_t>(cur)] != kRootHead) {
        cur = rec.heads[static_cast<std::size_t>(cur)];
        if (++steps > n)
          throw TreeError("sentence " + id + ": cyclic heads involving token " +
                          std::to_string(i));
      }
    }
    for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
      inst.tokens[i].pos_tag = rec.pos_tags[i];
      inst.tokens[i].head = rec.heads[i];
    }
  }
  return split;
}

int tree_distance(const std::vector<int>& heads, int a, int b) {
  if (a == b) return 0;
  const int n = static_cast<int>(heads.size());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int h = heads[static_cast<std::size_t>(i)];
    if (h == kRootHead) continue;
    adj[static_cast<std::size_t>(i)].push_back(h);
    adj[static_cast<std::size_t>(h)].push_back(i);
  }
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::deque<int> queue{a};
  dist[static_cast<std::size_t>(a)] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (u == b) return dist[static_cast<std::size_t>(u)];
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  throw TreeError("tokens " + std::to_string(a) + " and " + std::to_string(b) +
                  " are not connected");
}

int span_head_token(const Instance& inst, const Span& span) {
  for (int i = span.start; i < span.end; ++i) {
    int h = *inst.tokens[static_cast<std::size_t>(i)].head;
    if (h == kRootHead || !span.contains(h)) return i;
  }
  return span.start;
}

namespace {

// Token-index gap between two disjoint spans; adjacent spans are 1 apart.
int sequential_distance(const Span& a, const Span& b) {
  if (b.start >= a.end) return b.start - (a.end - 1);
  return a.start - (b.end - 1);
}

}  // namespace

CorpusStats compute_statistics(const DatasetSplit& split) {
  CorpusStats stats;
  std::set<std::string> seen;
  long length_sum = 0;
  double ddist_sum = 0, sdist_sum = 0;
  long pairs = 0;

  for (std::size_t k = 0; k < split.instances.size(); ++k) {
    const Instance& inst = split.instances[k];
    if (!inst.has_parses())
      throw PreconditionError("instance " + std::to_string(k) +
                              " has no parses; join_parses first");
    const std::string id = inst.sent_id.empty() ? "#" + std::to_string(k) : inst.sent_id;
    if (seen.insert(id).second) {
      ++stats.num_sentences;
      length_sum += inst.size();
    }
    ++stats.num_aspect_terms;

    std::vector<int> heads;
    heads.reserve(inst.tokens.size());
    for (const Token& t : inst.tokens) heads.push_back(*t.head);

    int target_head = span_head_token(inst, inst.target_span);
    for (const Span& op : bio_decode(inst.gold_labels)) {
      ++stats.num_opinion_terms;
      ++pairs;
      sdist_sum += sequential_distance(inst.target_span, op);
      ddist_sum += tree_distance(heads, target_head, span_head_token(inst, op));
    }
  }

  stats.num_distance_pairs = pairs;
  if (stats.num_sentences > 0)
    stats.avg_sentence_length =
        static_cast<double>(length_sum) / static_cast<double>(stats.num_sentences);
  if (pairs > 0) {
    stats.avg_dependency_distance = ddist_sum / static_cast<double>(pairs);
    stats.avg_sequential_distance = sdist_sum / static_cast<double>(pairs);
  }
  return stats;
}

}  // namespace towe
