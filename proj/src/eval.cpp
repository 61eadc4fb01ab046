#include "towe/eval.hpp"

#include <algorithm>

namespace towe {

EvalReport score(const std::vector<std::vector<Span>>& pred,
                 const std::vector<std::vector<Span>>& gold) {
  if (pred.size() != gold.size())
    throw Error("score: " + std::to_string(pred.size()) + " prediction lists vs " +
                std::to_string(gold.size()) + " gold lists");
  EvalReport r;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    std::vector<Span> p = pred[k], g = gold[k];
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    r.num_pred_spans += static_cast<long>(p.size());
    r.num_gold_spans += static_cast<long>(g.size());
    std::vector<Span> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                          std::back_inserter(both));
    r.num_correct += static_cast<long>(both.size());
  }
  if (r.num_pred_spans > 0)
    r.precision = static_cast<double>(r.num_correct) / static_cast<double>(r.num_pred_spans);
  if (r.num_gold_spans > 0)
    r.recall = static_cast<double>(r.num_correct) / static_cast<double>(r.num_gold_spans);
  if (r.precision + r.recall > 0)
    r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

AggregateReport aggregate(std::vector<EvalReport> per_seed) {
  AggregateReport agg;
  agg.per_seed = std::move(per_seed);
  if (agg.per_seed.empty()) return agg;
  for (const EvalReport& r : agg.per_seed) {
    agg.mean_precision += r.precision;
    agg.mean_recall += r.recall;
    agg.mean_f1 += r.f1;
  }
  auto n = static_cast<double>(agg.per_seed.size());
  agg.mean_precision /= n;
  agg.mean_recall /= n;
  agg.mean_f1 /= n;
  return agg;
}

}  // namespace towe
