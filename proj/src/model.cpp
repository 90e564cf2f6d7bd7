#include "fedrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace fedrec {

std::vector<double>& SparseGrad::row(int item) {
  auto [it, inserted] = rows.try_emplace(item);
  if (inserted) it->second.assign(static_cast<std::size_t>(dim), 0.0);
  return it->second;
}

const std::vector<double>* SparseGrad::find(int item) const {
  auto it = rows.find(item);
  return it == rows.end() ? nullptr : &it->second;
}

void SparseGrad::drop_zero_rows() {
  for (auto it = rows.begin(); it != rows.end();) {
    const bool zero = std::all_of(it->second.begin(), it->second.end(),
                                  [](double x) { return x == 0.0; });
    it = zero ? rows.erase(it) : std::next(it);
  }
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double predict_score(std::span<const double> u, std::span<const double> v) { return dot(u, v); }

namespace {

void check_pair_items(const ItemMatrix& V, const PairSet& pairs) {
  for (const auto& [j, k] : pairs.pairs) {
    if (j < 0 || j >= V.rows || k < 0 || k >= V.rows) {
      throw std::out_of_range("pair references an item outside the matrix");
    }
  }
}

}  // namespace

double bpr_loss(std::span<const double> u, const ItemMatrix& V, const PairSet& pairs) {
  if (static_cast<int>(u.size()) != V.cols) throw std::invalid_argument("bpr_loss: dim mismatch");
  check_pair_items(V, pairs);
  double loss = 0.0;
  for (const auto& [j, k] : pairs.pairs) {
    const double margin = predict_score(u, V.row_span(j)) - predict_score(u, V.row_span(k));
    loss += softplus(-margin);
  }
  return loss;
}

void bpr_gradients(std::span<const double> u, const ItemMatrix& V, const PairSet& pairs,
                   std::vector<double>& grad_user, SparseGrad& grad_items) {
  if (static_cast<int>(u.size()) != V.cols) {
    throw std::invalid_argument("bpr_gradients: dim mismatch");
  }
  check_pair_items(V, pairs);
  const int dim = V.cols;
  grad_user.assign(static_cast<std::size_t>(dim), 0.0);
  grad_items = SparseGrad(dim);
  for (const auto& [j, k] : pairs.pairs) {
    const double* vj = V.row(j);
    const double* vk = V.row(k);
    const double margin = predict_score(u, {vj, u.size()}) - predict_score(u, {vk, u.size()});
    const double s = sigmoid(-margin);
    auto& gj = grad_items.row(j);
    auto& gk = grad_items.row(k);
    for (int d = 0; d < dim; ++d) {
      grad_user[static_cast<std::size_t>(d)] -= s * (vj[d] - vk[d]);
      gj[static_cast<std::size_t>(d)] -= s * u[static_cast<std::size_t>(d)];
      gk[static_cast<std::size_t>(d)] += s * u[static_cast<std::size_t>(d)];
    }
  }
}

void score_all(std::span<const double> u, const ItemMatrix& V, std::span<double> out) {
  if (static_cast<int>(u.size()) != V.cols) throw std::invalid_argument("score_all: dim mismatch");
  if (static_cast<int>(out.size()) != V.rows) {
    throw std::invalid_argument("score_all: output size mismatch");
  }
  for (int j = 0; j < V.rows; ++j) {
    out[static_cast<std::size_t>(j)] = predict_score(u, V.row_span(j));
  }
}

namespace {

struct Ranked {
  double score;
  int item;
};

// True when a ranks strictly ahead of b.
bool ranks_before(const Ranked& a, const Ranked& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

}  // namespace

std::vector<int> select_top_k(std::span<const double> scores, const std::vector<int>& excluded,
                              int K) {
  if (K <= 0) throw std::invalid_argument("select_top_k: K must be positive");
  const int m = static_cast<int>(scores.size());
  // priority_queue keeps the worst retained entry on top.
  std::priority_queue<Ranked, std::vector<Ranked>, decltype(&ranks_before)> heap(&ranks_before);
  std::size_t ex = 0;
  int candidates = 0;
  for (int j = 0; j < m; ++j) {
    while (ex < excluded.size() && excluded[ex] < j) ++ex;
    if (ex < excluded.size() && excluded[ex] == j) continue;
    ++candidates;
    const Ranked r{scores[static_cast<std::size_t>(j)], j};
    if (static_cast<int>(heap.size()) < K) {
      heap.push(r);
    } else if (ranks_before(r, heap.top())) {
      heap.pop();
      heap.push(r);
    }
  }
  if (candidates < K) {
    throw std::invalid_argument("select_top_k: fewer than K candidate items");
  }
  std::vector<Ranked> kept;
  kept.reserve(heap.size());
  while (!heap.empty()) {
    kept.push_back(heap.top());
    heap.pop();
  }
  std::sort(kept.begin(), kept.end(), ranks_before);
  std::vector<int> out;
  out.reserve(kept.size());
  for (const auto& r : kept) out.push_back(r.item);
  return out;
}

std::vector<int> top_k_items(std::span<const double> u, const ItemMatrix& V,
                             const std::vector<int>& excluded, int K) {
  std::vector<double> scores(static_cast<std::size_t>(V.rows));
  score_all(u, V, scores);
  return select_top_k(scores, excluded, K);
}

Matrix init_embeddings(int rows, int dim, Rng& rng) {
  Matrix m(rows, dim);
  const double bound = 0.5 / std::sqrt(static_cast<double>(dim));
  for (auto& x : m.a) x = rng.uniform(-bound, bound);
  return m;
}

std::vector<double> init_embedding_row(int dim, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  const double bound = 0.5 / std::sqrt(static_cast<double>(dim));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

}  // namespace fedrec
