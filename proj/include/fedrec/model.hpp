#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "fedrec/rng.hpp"

namespace fedrec {

// Dense row-major matrix of embedding rows.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
  std::span<double> row_span(int r) { return {row(r), static_cast<std::size_t>(cols)}; }
  std::span<const double> row_span(int r) const { return {row(r), static_cast<std::size_t>(cols)}; }
};

// The shared item-embedding matrix V (one row per item).
using ItemMatrix = Matrix;

// A private user embedding; `owner` is the client index it belongs to.
struct UserVector {
  std::vector<double> values;
  int owner = -1;
};

// One user's training pairs: (positive item, sampled negative item).
struct PairSet {
  std::vector<std::pair<int, int>> pairs;
};

// Sparse row-indexed gradient (or update) for an item matrix.
struct SparseGrad {
  int dim = 0;
  std::map<int, std::vector<double>> rows;

  explicit SparseGrad(int d = 0) : dim(d) {}
  std::vector<double>& row(int item);
  const std::vector<double>* find(int item) const;
  void drop_zero_rows();
  std::size_t n_rows() const { return rows.size(); }
};

double sigmoid(double x);
double softplus(double x);
double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

// Predicted preference of a user for an item.
double predict_score(std::span<const double> u, std::span<const double> v);

// Pairwise ranking loss: sum over pairs of softplus(score(neg) - score(pos)).
double bpr_loss(std::span<const double> u, const ItemMatrix& V, const PairSet& pairs);

// Gradients of bpr_loss with respect to the user vector and the touched item
// rows. Rows of every item appearing in `pairs` are present in `grad_items`
// even when numerically zero.
void bpr_gradients(std::span<const double> u, const ItemMatrix& V, const PairSet& pairs,
                   std::vector<double>& grad_user, SparseGrad& grad_items);

void score_all(std::span<const double> u, const ItemMatrix& V, std::span<double> out);

// Indices of the K highest-scoring items outside `excluded`, in descending
// score order; ties broken by ascending item index. `excluded` must be sorted.
std::vector<int> select_top_k(std::span<const double> scores, const std::vector<int>& excluded,
                              int K);
std::vector<int> top_k_items(std::span<const double> u, const ItemMatrix& V,
                             const std::vector<int>& excluded, int K);

// Entries iid uniform in [-0.5/sqrt(dim), 0.5/sqrt(dim)].
Matrix init_embeddings(int rows, int dim, Rng& rng);
std::vector<double> init_embedding_row(int dim, Rng& rng);

}  // namespace fedrec
