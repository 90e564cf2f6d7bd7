#include "fedrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedrec {

namespace {

void check_shapes(const Matrix& users, const ItemMatrix& V, const Dataset& train) {
  if (users.cols != V.cols) throw std::invalid_argument("metrics: embedding dim mismatch");
  if (users.rows != train.n_users) throw std::invalid_argument("metrics: user count mismatch");
  if (V.rows != train.n_items) throw std::invalid_argument("metrics: item count mismatch");
}

int unseen_targets(const Dataset& train, int user, const std::vector<int>& targets) {
  int n = 0;
  for (int tgt : targets) {
    if (!train.has_interaction(user, tgt)) ++n;
  }
  return n;
}

double ideal_dcg(int k, int relevant) {
  double s = 0.0;
  const int top = std::min(k, relevant);
  for (int r = 1; r <= top; ++r) s += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return s;
}

}  // namespace

double exposure_ratio(const Matrix& users, const ItemMatrix& V, const Dataset& train,
                      const std::vector<int>& targets, int K) {
  check_shapes(users, V, train);
  double sum = 0.0;
  std::vector<double> scores(static_cast<std::size_t>(V.rows));
  for (int u = 0; u < train.n_users; ++u) {
    const int denom = unseen_targets(train, u, targets);
    if (denom == 0) continue;
    score_all(users.row_span(u), V, scores);
    auto rec = select_top_k(scores, train.positives[static_cast<std::size_t>(u)], K);
    int hits = 0;
    for (int item : rec) {
      if (std::find(targets.begin(), targets.end(), item) != targets.end()) ++hits;
    }
    sum += static_cast<double>(hits) / denom;
  }
  return sum / train.n_users;
}

double ndcg_targets(const Matrix& users, const ItemMatrix& V, const Dataset& train,
                    const std::vector<int>& targets, int K) {
  check_shapes(users, V, train);
  double sum = 0.0;
  std::vector<double> scores(static_cast<std::size_t>(V.rows));
  for (int u = 0; u < train.n_users; ++u) {
    const int denom = unseen_targets(train, u, targets);
    const double idcg = ideal_dcg(K, denom);
    if (idcg == 0.0) continue;
    score_all(users.row_span(u), V, scores);
    auto rec = select_top_k(scores, train.positives[static_cast<std::size_t>(u)], K);
    double dcg = 0.0;
    for (std::size_t r = 0; r < rec.size(); ++r) {
      if (std::find(targets.begin(), targets.end(), rec[r]) != targets.end()) {
        dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    sum += dcg / idcg;
  }
  return sum / train.n_users;
}

double hit_ratio(const Matrix& users, const ItemMatrix& V, const Split& split, int K) {
  check_shapes(users, V, split.train);
  if (split.test.empty()) return 0.0;
  int hits = 0;
  std::vector<double> scores(static_cast<std::size_t>(V.rows));
  for (const auto& [u, held] : split.test) {
    score_all(users.row_span(u), V, scores);
    auto rec = select_top_k(scores, split.train.positives[static_cast<std::size_t>(u)], K);
    if (std::find(rec.begin(), rec.end(), held) != rec.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.test.size());
}

MetricSnapshot evaluate_all(const Matrix& users, const ItemMatrix& V, const Split& split,
                            const std::vector<int>& targets, const std::vector<int>& ks, long t,
                            int epoch) {
  const Dataset& train = split.train;
  check_shapes(users, V, train);
  if (ks.empty()) throw std::invalid_argument("evaluate_all: no cutoffs given");
  const int max_k = *std::max_element(ks.begin(), ks.end());

  MetricSnapshot snap;
  snap.t = t;
  snap.epoch = epoch;
  std::map<int, double> er_sum, ndcg_sum;
  std::map<int, int> hr_hits;
  for (int k : ks) {
    er_sum[k] = 0.0;
    ndcg_sum[k] = 0.0;
    hr_hits[k] = 0;
  }

  std::vector<double> scores(static_cast<std::size_t>(V.rows));
  std::vector<char> is_target(static_cast<std::size_t>(V.rows), 0);
  for (int tgt : targets) {
    if (tgt < 0 || tgt >= V.rows) throw std::out_of_range("evaluate_all: target out of range");
    is_target[static_cast<std::size_t>(tgt)] = 1;
  }

  for (int u = 0; u < train.n_users; ++u) {
    score_all(users.row_span(u), V, scores);
    auto rec = select_top_k(scores, train.positives[static_cast<std::size_t>(u)], max_k);
    const int denom = unseen_targets(train, u, targets);
    auto test_it = split.test.find(u);

    for (int k : ks) {
      int hits = 0;
      double dcg = 0.0;
      bool held_hit = false;
      for (int r = 0; r < k; ++r) {
        const int item = rec[static_cast<std::size_t>(r)];
        if (is_target[static_cast<std::size_t>(item)]) {
          ++hits;
          dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
        if (test_it != split.test.end() && item == test_it->second) held_hit = true;
      }
      if (denom > 0) {
        er_sum[k] += static_cast<double>(hits) / denom;
        const double idcg = ideal_dcg(k, denom);
        if (idcg > 0.0) ndcg_sum[k] += dcg / idcg;
      }
      if (held_hit) ++hr_hits[k];
    }
  }

  for (int k : ks) {
    snap.er[k] = er_sum[k] / train.n_users;
    snap.ndcg[k] = ndcg_sum[k] / train.n_users;
    snap.hr[k] = split.test.empty()
                     ? 0.0
                     : static_cast<double>(hr_hits[k]) / static_cast<double>(split.test.size());
  }
  return snap;
}

}  // namespace fedrec
