#pragma once

// Randomized property suites shared between the module tests and the
// acceptance gate. Each returns the number of failing instances (0 = pass).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedrec/attack.hpp"
#include "fedrec/dataset.hpp"
#include "fedrec/fedsim.hpp"
#include "fedrec/harness.hpp"
#include "fedrec/metrics.hpp"
#include "fedrec/model.hpp"
#include "fedrec/rng.hpp"
#include "fedrec/synth.hpp"

#include "oracles.hpp"

namespace props {

inline fedrec::Matrix random_matrix(int rows, int cols, fedrec::Rng& rng, double bound = 1.0) {
  fedrec::Matrix m(rows, cols);
  for (auto& x : m.a) x = rng.uniform(-bound, bound);
  return m;
}

inline int bpr_gradient_matches_finite_differences(int instances, std::uint64_t seed) {
  fedrec::Rng rng(seed);
  int failures = 0;
  for (int it = 0; it < instances; ++it) {
    const int dim = 2 + rng.index(5);
    const int m = 5 + rng.index(6);
    auto V = random_matrix(m, dim, rng);
    std::vector<double> u(static_cast<std::size_t>(dim));
    for (auto& x : u) x = rng.uniform(-1.0, 1.0);
    fedrec::PairSet pairs;
    const int n_pairs = 1 + rng.index(8);
    for (int p = 0; p < n_pairs; ++p) {
      const int j = rng.index(m);
      int k = rng.index(m);
      while (k == j) k = rng.index(m);
      pairs.pairs.emplace_back(j, k);
    }

    std::vector<double> grad_user;
    fedrec::SparseGrad grad_items(dim);
    fedrec::bpr_gradients(u, V, pairs, grad_user, grad_items);

    const double eps = 1e-5;
    bool ok = true;
    auto loss_u = [&] { return fedrec::bpr_loss(u, V, pairs); };
    for (int d = 0; d < dim; ++d) {
      const double fd = oracle::central_diff(loss_u, &u[static_cast<std::size_t>(d)], eps);
      if (!oracle::close(grad_user[static_cast<std::size_t>(d)], fd, 1e-7, 1e-4)) ok = false;
    }
    for (const auto& [item, row] : grad_items.rows) {
      for (int d = 0; d < dim; ++d) {
        double* slot = V.row(item) + d;
        const double fd = oracle::central_diff(loss_u, slot, eps);
        if (!oracle::close(row[static_cast<std::size_t>(d)], fd, 1e-7, 1e-4)) ok = false;
      }
    }
    if (!ok) ++failures;
  }
  return failures;
}

inline int top_k_matches_full_sort(int instances, std::uint64_t seed) {
  fedrec::Rng rng(seed);
  int failures = 0;
  for (int it = 0; it < instances; ++it) {
    const int m = 10 + rng.index(50);
    std::vector<double> scores(static_cast<std::size_t>(m));
    for (auto& s : scores) s = rng.index(8) * 0.25;  // coarse grid to force ties
    std::vector<int> excluded;
    for (int j = 0; j < m; ++j) {
      if (rng.uniform01() < 0.2) excluded.push_back(j);
    }
    const int K = 1 + rng.index(std::max(1, m - static_cast<int>(excluded.size())));
    const auto got = fedrec::select_top_k(scores, excluded, K);
    const auto want = oracle::top_k(scores, excluded, K);
    if (got != want) ++failures;
  }
  return failures;
}

inline int metrics_match_brute_force(int instances, std::uint64_t seed) {
  fedrec::Rng rng(seed);
  int failures = 0;
  for (int it = 0; it < instances; ++it) {
    const int n = 2 + rng.index(7);
    const int m = 12 + rng.index(9);
    const int dim = 2 + rng.index(3);
    fedrec::Dataset train;
    train.n_users = n;
    train.n_items = m;
    train.positives.resize(static_cast<std::size_t>(n));
    fedrec::Split split;
    for (int u = 0; u < n; ++u) {
      auto& pos = train.positives[static_cast<std::size_t>(u)];
      const int c = rng.index(3);
      for (int j = 0; j < c; ++j) {
        const int item = rng.index(m);
        if (!oracle::contains(pos, item)) pos.push_back(item);
      }
      std::sort(pos.begin(), pos.end());
      if (rng.uniform01() < 0.7) {
        int held = rng.index(m);
        while (oracle::contains(pos, held)) held = rng.index(m);
        split.test[u] = held;
      }
    }
    split.train = train;
    std::vector<int> targets;
    const int n_targets = 1 + rng.index(3);
    while (static_cast<int>(targets.size()) < n_targets) {
      const int t = rng.index(m);
      if (!oracle::contains(targets, t)) targets.push_back(t);
    }
    std::sort(targets.begin(), targets.end());
    auto users = random_matrix(n, dim, rng);
    auto V = random_matrix(m, dim, rng);
    const int K = 1 + rng.index(8);

    bool ok = true;
    if (!oracle::close(fedrec::exposure_ratio(users, V, train, targets, K),
                       oracle::exposure_ratio(users, V, train, targets, K), 1e-12, 1e-12)) {
      ok = false;
    }
    if (!oracle::close(fedrec::ndcg_targets(users, V, train, targets, K),
                       oracle::ndcg_targets(users, V, train, targets, K), 1e-12, 1e-12)) {
      ok = false;
    }
    if (!oracle::close(fedrec::hit_ratio(users, V, split, K),
                       oracle::hit_ratio(users, V, split, K), 1e-12, 1e-12)) {
      ok = false;
    }
    const auto snap = fedrec::evaluate_all(users, V, split, targets, {K}, 0, 0);
    if (!oracle::close(snap.er.at(K), oracle::exposure_ratio(users, V, train, targets, K), 1e-12,
                       1e-12) ||
        !oracle::close(snap.ndcg.at(K), oracle::ndcg_targets(users, V, train, targets, K), 1e-12,
                       1e-12) ||
        !oracle::close(snap.hr.at(K), oracle::hit_ratio(users, V, split, K), 1e-12, 1e-12)) {
      ok = false;
    }
    if (!ok) ++failures;
  }
  return failures;
}

inline int gap_penalty_properties() {
  int failures = 0;
  if (fedrec::gap_penalty(0.0) != 0.0) ++failures;
  if (fedrec::gap_penalty(3.25) != 3.25) ++failures;
  if (fedrec::gap_penalty_derivative(-10.0) >= 1e-4) ++failures;
  // strictly above the -1 bound where doubles can still resolve the gap, and
  // never below it even once exp(x) underflows
  if (fedrec::gap_penalty(-30.0) <= -1.0) ++failures;
  if (fedrec::gap_penalty(-745.0) < -1.0) ++failures;
  double prev = fedrec::gap_penalty(-30.0);
  for (double x = -29.9; x < 30.0; x += 0.1) {
    const double cur = fedrec::gap_penalty(x);
    if (cur < prev) ++failures;
    prev = cur;
  }
  for (double x = -8.0; x <= 8.0; x += 0.37) {
    double slot = x;
    const double fd = oracle::central_diff([&] { return fedrec::gap_penalty(slot); }, &slot, 1e-6);
    if (!oracle::close(fedrec::gap_penalty_derivative(x), fd, 1e-6, 1e-5)) ++failures;
  }
  return failures;
}

struct AttackFixture {
  fedrec::PublicView pub;
  fedrec::ItemMatrix V;
  fedrec::FedRecAttackOptions opts;
  int n_items = 0;
  int dim = 0;
};

inline AttackFixture random_attack_fixture(fedrec::Rng& rng) {
  AttackFixture fx;
  fx.n_items = 18 + rng.index(15);
  fx.dim = 2 + rng.index(4);
  const int n_users = 3 + rng.index(5);
  fx.pub.xi = 0.5;
  fx.pub.positives.resize(static_cast<std::size_t>(n_users));
  for (auto& pos : fx.pub.positives) {
    const int c = rng.index(4);  // empty public rows allowed
    for (int j = 0; j < c; ++j) {
      const int item = rng.index(fx.n_items);
      if (!oracle::contains(pos, item)) pos.push_back(item);
    }
    std::sort(pos.begin(), pos.end());
  }
  fx.opts.targets = {rng.index(fx.n_items)};
  if (rng.uniform01() < 0.4) {
    int second = rng.index(fx.n_items);
    while (second == fx.opts.targets[0]) second = rng.index(fx.n_items);
    fx.opts.targets.push_back(second);
  }
  fx.opts.kappa = 2 * static_cast<int>(fx.opts.targets.size()) + rng.index(6);
  fx.opts.clip_norm = 1.0;
  fx.opts.rec_list_size = 2 + rng.index(3);
  fx.opts.inner_steps = 2;
  fx.opts.inner_eta = 0.05;
  fx.opts.seed = rng.next();
  fx.V = random_matrix(fx.n_items, fx.dim, rng);
  return fx;
}

inline int attack_gradient_matches_finite_differences(int instances, std::uint64_t seed) {
  fedrec::Rng rng(seed);
  int failures = 0;
  for (int it = 0; it < instances; ++it) {
    auto fx = random_attack_fixture(rng);
    fx.opts.zeta = 1.0;
    fedrec::FedRecAttack atk(fx.pub, fx.n_items, fx.dim, fx.opts);
    if (!atk.applicable()) continue;
    atk.approximate_user_matrix(fx.V, 3, 0.05);

    const auto terms = atk.collect_loss_terms(fx.V);
    const auto& u_hat = atk.user_matrix();
    auto frozen_loss = [&] {
      double L = 0.0;
      for (const auto& t : terms) {
        const double st = oracle::dot(u_hat.row(t.user), fx.V.row(t.threshold_item), fx.dim);
        const double sg = oracle::dot(u_hat.row(t.user), fx.V.row(t.target), fx.dim);
        L += fedrec::gap_penalty(st - sg);
      }
      return L;
    };
    if (!oracle::close(atk.attack_loss(fx.V), frozen_loss(), 1e-10, 1e-10)) {
      ++failures;
      continue;
    }

    const auto grad = atk.poisoned_gradient(fx.V);
    bool ok = true;
    for (int j = 0; j < fx.n_items; ++j) {
      const auto* row = grad.find(j);
      for (int d = 0; d < fx.dim; ++d) {
        const double fd =
            oracle::central_diff(frozen_loss, fx.V.row(j) + d, 1e-6);
        const double analytic = row ? (*row)[static_cast<std::size_t>(d)] : 0.0;
        if (!oracle::close(analytic, fd, 1e-6, 1e-4)) ok = false;
      }
    }
    if (!ok) ++failures;
  }
  return failures;
}

inline int attack_step_descends(int instances, std::uint64_t seed) {
  fedrec::Rng rng(seed);
  int failures = 0;
  for (int it = 0; it < instances; ++it) {
    auto fx = random_attack_fixture(rng);
    fx.opts.zeta = 1.0;
    fedrec::FedRecAttack atk(fx.pub, fx.n_items, fx.dim, fx.opts);
    if (!atk.applicable()) continue;
    atk.approximate_user_matrix(fx.V, 3, 0.05);
    const auto terms = atk.collect_loss_terms(fx.V);
    const auto& u_hat = atk.user_matrix();
    auto frozen_loss = [&](const fedrec::Matrix& W) {
      double L = 0.0;
      for (const auto& t : terms) {
        const double st = oracle::dot(u_hat.row(t.user), W.row(t.threshold_item), fx.dim);
        const double sg = oracle::dot(u_hat.row(t.user), W.row(t.target), fx.dim);
        L += fedrec::gap_penalty(st - sg);
      }
      return L;
    };
    const auto grad = atk.poisoned_gradient(fx.V);
    double grad_norm2 = 0.0;
    auto stepped = fx.V;
    for (const auto& [item, row] : grad.rows) {
      for (int d = 0; d < fx.dim; ++d) {
        stepped.row(item)[d] -= 1e-3 * row[static_cast<std::size_t>(d)];
        grad_norm2 += row[static_cast<std::size_t>(d)] * row[static_cast<std::size_t>(d)];
      }
    }
    if (grad_norm2 == 0.0) continue;
    if (frozen_loss(stepped) >= frozen_loss(fx.V)) ++failures;
  }
  return failures;
}

// One full round, applied exactly as the server would apply it, must strictly
// lower the objective it was derived from (user matrix and list choices held
// fixed). Instances whose uploads carry no first-order signal are skipped.
inline int attack_round_descends(int instances, std::uint64_t seed) {
  fedrec::Rng rng(seed);
  int failures = 0;
  for (int it = 0; it < instances; ++it) {
    auto fx = random_attack_fixture(rng);
    fx.opts.zeta = 1.0;
    fedrec::FedRecAttack atk(fx.pub, fx.n_items, fx.dim, fx.opts);
    if (!atk.applicable()) continue;

    const double eta = 1e-3;
    std::vector<int> selected;
    const int n_sel = 1 + rng.index(3);
    for (int s = 0; s < n_sel; ++s) selected.push_back(50 + s);
    const auto uploads = atk.round(fx.V, eta, 1, selected);

    // same user matrix the round used, so the term set is reproducible
    const auto terms = atk.collect_loss_terms(fx.V);
    const auto& u_hat = atk.user_matrix();
    auto frozen_loss = [&](const fedrec::Matrix& W) {
      double L = 0.0;
      for (const auto& t : terms) {
        const double st = oracle::dot(u_hat.row(t.user), W.row(t.threshold_item), fx.dim);
        const double sg = oracle::dot(u_hat.row(t.user), W.row(t.target), fx.dim);
        L += fedrec::gap_penalty(st - sg);
      }
      return L;
    };

    const auto grad = atk.poisoned_gradient(fx.V);
    auto stepped = fx.V;
    double first_order = 0.0;
    for (const auto& up : uploads) {
      for (const auto& [item, row] : up.grad.rows) {
        const auto* g = grad.find(item);
        for (int d = 0; d < fx.dim; ++d) {
          stepped.row(item)[d] -= eta * row[static_cast<std::size_t>(d)];
          if (g) first_order += eta * (*g)[static_cast<std::size_t>(d)] *
                                row[static_cast<std::size_t>(d)];
        }
      }
    }
    const double before = frozen_loss(fx.V);
    if (first_order <= 1e-12 * (1.0 + std::abs(before))) continue;
    if (frozen_loss(stepped) >= before) ++failures;
  }
  return failures;
}

inline int uploads_respect_limits(int instances, std::uint64_t seed) {
  fedrec::Rng rng(seed);
  int failures = 0;
  for (int it = 0; it < instances; ++it) {
    auto fx = random_attack_fixture(rng);
    fx.opts.zeta = std::exp(rng.uniform(-1.0, 3.0));  // include large scales
    fedrec::FedRecAttack atk(fx.pub, fx.n_items, fx.dim, fx.opts);
    bool ok = true;
    for (int round = 1; round <= 4; ++round) {
      std::vector<int> selected;
      const int n_sel = 1 + rng.index(4);
      for (int s = 0; s < n_sel; ++s) selected.push_back(100 + rng.index(8));
      auto uploads = atk.round(fx.V, 0.01, round, selected);
      for (const auto& up : uploads) {
        int nonzero = 0;
        for (const auto& [item, row] : up.grad.rows) {
          const double norm = fedrec::l2_norm(row);
          if (norm > 0.0) ++nonzero;
          if (norm > fx.opts.clip_norm * (1.0 + 1e-9)) ok = false;
          if (!oracle::contains(atk.item_set_for(up.sender), item)) ok = false;
        }
        if (nonzero > fx.opts.kappa) ok = false;
      }
      // perturb V as the server would between rounds
      for (auto& x : fx.V.a) x += rng.uniform(-0.01, 0.01);
    }
    if (!ok) ++failures;
  }
  return failures;
}

// Two identical runs must agree bit for bit on everything except wall time.
inline int run_is_deterministic(const std::filesystem::path& workdir) {
  fedrec::SynthSpec spec;
  spec.n_users = 40;
  spec.n_items = 80;
  spec.target_interactions = 700;
  spec.min_per_user = 5;
  spec.max_per_user = 40;
  spec.count_log_mu = 2.7;
  spec.seed = 9;
  const auto path = workdir / "determinism_corpus.tsv";
  fedrec::write_interactions(path, fedrec::synthesize_interactions(spec),
                             fedrec::InteractionFormat::movielens_tab);

  fedrec::ExperimentConfig cfg;
  cfg.dataset = path.string();
  cfg.attack = "fedrecattack";
  cfg.k = 8;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.eval_every = 2;
  cfg.kappa = 12;
  cfg.xi = 0.2;
  cfg.rho = 0.1;
  cfg.targets = "cold:1";

  auto a = fedrec::run_experiment_full(cfg);
  auto b = fedrec::run_experiment_full(cfg);
  a.row.wall_s = 0.0;
  b.row.wall_s = 0.0;
  if (!(a.row == b.row)) return 1;
  if (a.snapshots.size() != b.snapshots.size()) return 1;
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    if (a.snapshots[i].er != b.snapshots[i].er || a.snapshots[i].ndcg != b.snapshots[i].ndcg ||
        a.snapshots[i].hr != b.snapshots[i].hr) {
      return 1;
    }
  }
  return a.targets == b.targets ? 0 : 1;
}

}  // namespace props
