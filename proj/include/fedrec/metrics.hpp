#pragma once

#include <map>
#include <vector>

#include "fedrec/dataset.hpp"
#include "fedrec/model.hpp"

namespace fedrec {

// One evaluation point of the training run. Metric maps are keyed by the
// cutoff K.
struct MetricSnapshot {
  long t = 0;
  int epoch = 0;
  std::map<int, double> er;
  std::map<int, double> ndcg;
  std::map<int, double> hr;
};

// Mean over users of |targets in top-K| / |targets not seen in training|,
// ranking all items except the user's training positives. Users whose
// denominator is zero contribute 0 and still count in the mean.
double exposure_ratio(const Matrix& users, const ItemMatrix& V, const Dataset& train,
                      const std::vector<int>& targets, int K);

// Mean binary-relevance NDCG of the target items at cutoff K.
double ndcg_targets(const Matrix& users, const ItemMatrix& V, const Dataset& train,
                    const std::vector<int>& targets, int K);

// Fraction of test users whose held-out item appears in their top-K.
double hit_ratio(const Matrix& users, const ItemMatrix& V, const Split& split, int K);

// All three metric families for every K in `ks`, sharing one ranking pass per
// user. `users` must hold one row per training-set user.
MetricSnapshot evaluate_all(const Matrix& users, const ItemMatrix& V, const Split& split,
                            const std::vector<int>& targets, const std::vector<int>& ks, long t,
                            int epoch);

}  // namespace fedrec
