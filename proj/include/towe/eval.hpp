#ifndef TOWE_EVAL_HPP
#define TOWE_EVAL_HPP

#include <string>
#include <vector>

#include "towe/common.hpp"

namespace towe {

// Micro-averaged exact-span metrics, stored in [0,1] and rendered x100.
// A predicted span counts as correct only when its boundaries equal a gold
// span of the same (sentence, target) instance.
struct EvalReport {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  long num_pred_spans = 0;
  long num_gold_spans = 0;
  long num_correct = 0;
};

// pred and gold are aligned per instance.
EvalReport score(const std::vector<std::vector<Span>>& pred,
                 const std::vector<std::vector<Span>>& gold);

// Mean metrics across repeated runs of one configuration.
struct AggregateReport {
  std::vector<EvalReport> per_seed;
  double mean_precision = 0;
  double mean_recall = 0;
  double mean_f1 = 0;
};

AggregateReport aggregate(std::vector<EvalReport> per_seed);

}  // namespace towe

#endif
