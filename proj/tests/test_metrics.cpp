#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedrec/metrics.hpp"
#include "oracles.hpp"
#include "properties.hpp"

using namespace fedrec;

namespace {

// Two users, twelve items. User embeddings pick a row of V as their scores.
struct SmallWorld {
  Dataset train;
  Split split;
  Matrix users{2, 2};
  ItemMatrix V{12, 2};
};

SmallWorld make_world() {
  SmallWorld w;
  w.train.n_users = 2;
  w.train.n_items = 12;
  w.train.positives = {{0, 1}, {2}};
  w.split.train = w.train;
  w.split.test = {{0, 3}, {1, 4}};
  w.users.row(0)[0] = 1.0;
  w.users.row(1)[1] = 1.0;
  // scores for user 0 come from column 0, user 1 from column 1
  for (int j = 0; j < 12; ++j) {
    w.V.row(j)[0] = 12.0 - j;
    w.V.row(j)[1] = static_cast<double>(j);
  }
  return w;
}

}  // namespace

TEST_CASE("a target pinned at the top of every list gives ER 1") {
  auto w = make_world();
  // make item 5 the global top item
  w.V.row(5)[0] = 100.0;
  w.V.row(5)[1] = 100.0;
  CHECK(exposure_ratio(w.users, w.V, w.train, {5}, 1) == 1.0);
  CHECK(exposure_ratio(w.users, w.V, w.train, {5}, 10) == 1.0);
  CHECK(ndcg_targets(w.users, w.V, w.train, {5}, 10) == 1.0);
}

TEST_CASE("a target ranked below K for everyone gives ER 0") {
  auto w = make_world();
  w.V.row(5)[0] = -100.0;
  w.V.row(5)[1] = -100.0;
  CHECK(exposure_ratio(w.users, w.V, w.train, {5}, 5) == 0.0);
  CHECK(ndcg_targets(w.users, w.V, w.train, {5}, 5) == 0.0);
}

TEST_CASE("a training positive is excluded from a user's ranking") {
  auto w = make_world();
  // item 0 is user 0's training positive and the global best for user 0
  auto rec = top_k_items(w.users.row_span(0), w.V, w.train.positives[0], 3);
  CHECK(oracle::contains(rec, 2));
  CHECK_FALSE(oracle::contains(rec, 0));
  CHECK_FALSE(oracle::contains(rec, 1));
}

TEST_CASE("users holding every target in training contribute zero but still count") {
  Dataset train;
  train.n_users = 2;
  train.n_items = 12;
  train.positives = {{3}, {0, 1}};
  Matrix users(2, 1);
  users.row(0)[0] = 1.0;
  users.row(1)[0] = 1.0;
  ItemMatrix V(12, 1);
  for (int j = 0; j < 12; ++j) V.row(j)[0] = j == 3 ? 100.0 : -j;
  // target 3 is user 1's certain number one, user 0 trained on it
  CHECK(exposure_ratio(users, V, train, {3}, 2) == 0.5);
  CHECK(ndcg_targets(users, V, train, {3}, 2) == 0.5);
}

TEST_CASE("NDCG of a single target at rank 10") {
  Dataset train;
  train.n_users = 1;
  train.n_items = 30;
  train.positives = {{}};
  Matrix users(1, 1);
  users.row(0)[0] = 1.0;
  ItemMatrix V(30, 1);
  for (int j = 0; j < 30; ++j) V.row(j)[0] = 30.0 - j;
  // item 9 sits at rank 10; reference value computed with 50-digit arithmetic
  CHECK(oracle::close(ndcg_targets(users, V, train, {9}, 10), 0.28906482631788785927, 1e-15, 1e-15));
  CHECK(ndcg_targets(users, V, train, {0}, 10) == 1.0);
  CHECK(ndcg_targets(users, V, train, {10}, 10) == 0.0);
}

TEST_CASE("hit ratio counts held-out items inside top-K") {
  auto w = make_world();
  // user 0's held-out item 3 ranks fourth among its candidates, user 1's item
  // 4 ranks far down
  CHECK(hit_ratio(w.users, w.V, w.split, 1) == 0.0);
  CHECK(oracle::close(hit_ratio(w.users, w.V, w.split, 4), 0.5, 1e-15, 0.0));
  CHECK(hit_ratio(w.users, w.V, w.split, 10) == 1.0);

  Split empty;
  empty.train = w.train;
  CHECK(hit_ratio(w.users, w.V, empty, 5) == 0.0);
}

TEST_CASE("hit ratio is 1 when K spans all candidates") {
  auto w = make_world();
  CHECK(hit_ratio(w.users, w.V, w.split, 10) == 1.0);  // 12 items minus 2 positives
}

TEST_CASE("exposure ratio never decreases with K") {
  Rng rng(808);
  for (int trial = 0; trial < 20; ++trial) {
    auto users = props::random_matrix(4, 3, rng);
    auto V = props::random_matrix(15, 3, rng);
    Dataset train;
    train.n_users = 4;
    train.n_items = 15;
    train.positives = {{1}, {}, {2, 3}, {0}};
    const std::vector<int> targets = {5, 7};
    double prev = 0.0;
    for (int K = 1; K <= 10; ++K) {
      const double er = exposure_ratio(users, V, train, targets, K);
      CHECK(er >= prev - 1e-15);
      prev = er;
    }
  }
}

TEST_CASE("metrics are invariant to shifting all of a user's scores") {
  Rng rng(909);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3, m = 14, dim = 3;
    auto users = props::random_matrix(n, dim, rng);
    auto V = props::random_matrix(m, dim, rng);
    Dataset train;
    train.n_users = n;
    train.n_items = m;
    train.positives = {{0}, {5}, {}};

    // adding a constant column to V and 1s to users shifts every score by c
    Matrix users2(n, dim + 1);
    ItemMatrix V2(m, dim + 1);
    for (int i = 0; i < n; ++i) {
      std::copy(users.row(i), users.row(i) + dim, users2.row(i));
      users2.row(i)[dim] = 1.0;
    }
    for (int j = 0; j < m; ++j) {
      std::copy(V.row(j), V.row(j) + dim, V2.row(j));
      V2.row(j)[dim] = 2.5;  // same shift for every item
    }
    const std::vector<int> targets = {7, 9};
    for (int K : {1, 3, 6}) {
      CHECK(exposure_ratio(users, V, train, targets, K) ==
            exposure_ratio(users2, V2, train, targets, K));
      CHECK(ndcg_targets(users, V, train, targets, K) ==
            ndcg_targets(users2, V2, train, targets, K));
    }
  }
}

TEST_CASE("metrics match brute force on random instances") {
  CHECK(props::metrics_match_brute_force(250, 424242) == 0);
}

TEST_CASE("evaluate_all agrees with the standalone metrics") {
  auto w = make_world();
  auto snap = evaluate_all(w.users, w.V, w.split, {5, 8}, {1, 5, 8}, 17, 3);
  CHECK(snap.t == 17);
  CHECK(snap.epoch == 3);
  for (int K : {1, 5, 8}) {
    CHECK(snap.er.at(K) == exposure_ratio(w.users, w.V, w.train, {5, 8}, K));
    CHECK(snap.ndcg.at(K) == ndcg_targets(w.users, w.V, w.train, {5, 8}, K));
    CHECK(snap.hr.at(K) == hit_ratio(w.users, w.V, w.split, K));
  }
}
