#include "fedrec/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedrec {

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "none") return AttackKind::none;
  if (s == "random") return AttackKind::random_fill;
  if (s == "bandwagon") return AttackKind::bandwagon;
  if (s == "popular") return AttackKind::popular;
  if (s == "fedrecattack") return AttackKind::fedrecattack;
  throw std::invalid_argument("unknown attack '" + s + "'");
}

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::random_fill: return "random";
    case AttackKind::bandwagon: return "bandwagon";
    case AttackKind::popular: return "popular";
    case AttackKind::fedrecattack: return "fedrecattack";
  }
  return "?";
}

double gap_penalty(double x) { return x >= 0.0 ? x : std::expm1(x); }

double gap_penalty_derivative(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

namespace {

// Items ordered by interaction count descending, index ascending.
std::vector<int> items_by_popularity(const std::vector<long>& counts) {
  std::vector<int> order(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[static_cast<std::size_t>(a)] != counts[static_cast<std::size_t>(b)]) {
      return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<FakeProfile> build_fake_profiles(AttackKind kind, const std::vector<long>& item_counts,
                                             const std::vector<int>& targets, int kappa, int count,
                                             Rng& rng) {
  const int m = static_cast<int>(item_counts.size());
  const int profile_size = kappa / 2;
  const int n_targets = static_cast<int>(targets.size());
  if (profile_size < n_targets) {
    throw std::invalid_argument("build_fake_profiles: kappa/2 smaller than the target set");
  }
  const int filler_total = profile_size - n_targets;

  std::vector<char> is_target(static_cast<std::size_t>(m), 0);
  for (int t : targets) {
    if (t < 0 || t >= m) throw std::out_of_range("build_fake_profiles: target out of range");
    is_target[static_cast<std::size_t>(t)] = 1;
  }
  std::vector<int> non_targets;
  non_targets.reserve(static_cast<std::size_t>(m - n_targets));
  for (int j = 0; j < m; ++j) {
    if (!is_target[static_cast<std::size_t>(j)]) non_targets.push_back(j);
  }
  if (static_cast<int>(non_targets.size()) < filler_total) {
    throw std::invalid_argument("build_fake_profiles: not enough items for fillers");
  }

  std::vector<FakeProfile> profiles(static_cast<std::size_t>(count));
  auto finish = [&](FakeProfile& p, std::vector<int> fillers) {
    p.positives = targets;
    p.positives.insert(p.positives.end(), fillers.begin(), fillers.end());
    std::sort(p.positives.begin(), p.positives.end());
  };

  switch (kind) {
    case AttackKind::random_fill: {
      for (auto& p : profiles) finish(p, rng.sample_from(non_targets, filler_total));
      break;
    }
    case AttackKind::bandwagon: {
      const auto order = items_by_popularity(item_counts);
      const long pool_size = std::max<long>(1, round_half_up(0.1 * m));
      std::vector<char> in_pool(static_cast<std::size_t>(m), 0);
      for (long i = 0; i < pool_size && i < m; ++i) {
        in_pool[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
      }
      std::vector<int> pool, rest;
      for (int j : non_targets) (in_pool[static_cast<std::size_t>(j)] ? pool : rest).push_back(j);

      int from_pool = static_cast<int>(round_half_up(0.1 * filler_total));
      from_pool = std::min(from_pool, static_cast<int>(pool.size()));
      int from_rest = filler_total - from_pool;
      if (from_rest > static_cast<int>(rest.size())) {
        from_pool += from_rest - static_cast<int>(rest.size());
        from_rest = static_cast<int>(rest.size());
      }
      for (auto& p : profiles) {
        auto fillers = rng.sample_from(pool, from_pool);
        auto extra = rng.sample_from(rest, from_rest);
        fillers.insert(fillers.end(), extra.begin(), extra.end());
        finish(p, std::move(fillers));
      }
      break;
    }
    case AttackKind::popular: {
      const auto order = items_by_popularity(item_counts);
      std::vector<int> fillers;
      for (int j : order) {
        if (static_cast<int>(fillers.size()) == filler_total) break;
        if (!is_target[static_cast<std::size_t>(j)]) fillers.push_back(j);
      }
      for (auto& p : profiles) finish(p, fillers);
      break;
    }
    default:
      throw std::invalid_argument("build_fake_profiles: not a profile-based attack");
  }
  return profiles;
}

ProfileAttack::ProfileAttack(AttackKind kind, std::vector<int> targets, int kappa,
                             std::uint64_t seed)
    : kind_(kind), targets_(std::move(targets)), kappa_(kappa), rng_(seed) {
  if (kind != AttackKind::random_fill && kind != AttackKind::bandwagon &&
      kind != AttackKind::popular) {
    throw std::invalid_argument("ProfileAttack: not a profile-based attack");
  }
  std::sort(targets_.begin(), targets_.end());
}

std::vector<FakeProfile> ProfileAttack::make_profiles(const std::vector<long>& item_counts,
                                                      int count) {
  return build_fake_profiles(kind_, item_counts, targets_, kappa_, count, rng_);
}

FedRecAttack::FedRecAttack(PublicView public_view, int n_items, int dim, FedRecAttackOptions opts)
    : public_(std::move(public_view)),
      n_items_(n_items),
      dim_(dim),
      opts_(std::move(opts)),
      rng_(derive_seed(opts_.seed, seed_tag::attack)),
      residual_(dim) {
  if (opts_.targets.empty()) throw std::invalid_argument("FedRecAttack: no targets");
  std::sort(opts_.targets.begin(), opts_.targets.end());
  opts_.targets.erase(std::unique(opts_.targets.begin(), opts_.targets.end()),
                      opts_.targets.end());
  if (opts_.kappa < static_cast<int>(opts_.targets.size())) {
    throw std::invalid_argument("FedRecAttack: kappa smaller than the target set");
  }
  if (opts_.clip_norm <= 0.0) throw std::invalid_argument("FedRecAttack: clip_norm must be positive");
  if (opts_.rec_list_size < 1) throw std::invalid_argument("FedRecAttack: rec_list_size must be >= 1");
  is_target_.assign(static_cast<std::size_t>(n_items_), 0);
  for (int t : opts_.targets) {
    if (t < 0 || t >= n_items_) throw std::out_of_range("FedRecAttack: target out of range");
    is_target_[static_cast<std::size_t>(t)] = 1;
  }
}

void FedRecAttack::ensure_user_matrix() {
  if (u_hat_ready_) return;
  u_hat_ = init_embeddings(static_cast<int>(public_.positives.size()), dim_, rng_);
  u_hat_ready_ = true;
}

void FedRecAttack::approximate_user_matrix(const ItemMatrix& V, int steps, double inner_eta) {
  if (V.rows != n_items_ || V.cols != dim_) {
    throw std::invalid_argument("approximate_user_matrix: shape mismatch");
  }
  ensure_user_matrix();
  const int n = u_hat_.rows;
  for (int s = 0; s < steps; ++s) {
    for (int i = 0; i < n; ++i) {
      const auto& pos = public_.positives[static_cast<std::size_t>(i)];
      if (pos.empty() || static_cast<int>(pos.size()) >= n_items_) continue;
      double* u = u_hat_.row(i);
      for (int j : pos) {
        int neg = rng_.index(n_items_);
        while (public_.has(i, neg)) neg = rng_.index(n_items_);
        const double* vp = V.row(j);
        const double* vn = V.row(neg);
        double margin = 0.0;
        for (int d = 0; d < dim_; ++d) margin += u[d] * (vp[d] - vn[d]);
        const double co = sigmoid(-margin);
        for (int d = 0; d < dim_; ++d) u[d] += inner_eta * co * (vp[d] - vn[d]);
      }
    }
  }
}

std::vector<FedRecAttack::LossTerm> FedRecAttack::collect_loss_terms(const ItemMatrix& V) const {
  if (!u_hat_ready_) throw std::logic_error("collect_loss_terms: user matrix not initialized");
  std::vector<LossTerm> terms;
  std::vector<double> scores(static_cast<std::size_t>(n_items_));
  const int n = u_hat_.rows;
  for (int i = 0; i < n; ++i) {
    const auto& pos = public_.positives[static_cast<std::size_t>(i)];
    if (pos.empty()) continue;  // nothing is known about this user
    if (static_cast<int>(pos.size()) + opts_.rec_list_size > n_items_) continue;
    bool any_unseen_target = false;
    for (int t : opts_.targets) {
      if (!std::binary_search(pos.begin(), pos.end(), t)) {
        any_unseen_target = true;
        break;
      }
    }
    if (!any_unseen_target) continue;

    score_all(u_hat_.row_span(i), V, scores);
    auto rec = select_top_k(scores, pos, opts_.rec_list_size);
    int threshold_item = -1;
    double threshold = std::numeric_limits<double>::infinity();
    for (int item : rec) {
      if (is_target_[static_cast<std::size_t>(item)]) continue;
      if (scores[static_cast<std::size_t>(item)] < threshold) {
        threshold = scores[static_cast<std::size_t>(item)];
        threshold_item = item;
      }
    }
    if (threshold_item < 0) {
      // every slot already holds a target; nothing to push against
      ++skipped_empty_threshold_;
      continue;
    }
    for (int t : opts_.targets) {
      if (std::binary_search(pos.begin(), pos.end(), t)) continue;
      terms.push_back({i, threshold_item, t});
    }
  }
  return terms;
}

double FedRecAttack::attack_loss(const ItemMatrix& V) const {
  double loss = 0.0;
  for (const auto& term : collect_loss_terms(V)) {
    const double st =
        predict_score(u_hat_.row_span(term.user), V.row_span(term.threshold_item));
    const double sg = predict_score(u_hat_.row_span(term.user), V.row_span(term.target));
    loss += gap_penalty(st - sg);
  }
  return loss;
}

SparseGrad FedRecAttack::poisoned_gradient(const ItemMatrix& V) const {
  SparseGrad grad(dim_);
  if (opts_.zeta == 0.0) return grad;
  for (const auto& term : collect_loss_terms(V)) {
    const double* u = u_hat_.row(term.user);
    const double st = predict_score(u_hat_.row_span(term.user), V.row_span(term.threshold_item));
    const double sg = predict_score(u_hat_.row_span(term.user), V.row_span(term.target));
    const double d = opts_.zeta * gap_penalty_derivative(st - sg);
    auto& row_thr = grad.row(term.threshold_item);
    auto& row_tgt = grad.row(term.target);
    for (int k = 0; k < dim_; ++k) {
      row_thr[static_cast<std::size_t>(k)] += d * u[k];
      row_tgt[static_cast<std::size_t>(k)] -= d * u[k];
    }
  }
  grad.drop_zero_rows();
  return grad;
}

const std::vector<int>& FedRecAttack::item_set_for(int client) {
  auto it = item_sets_.find(client);
  if (it != item_sets_.end()) return it->second;

  std::vector<int> chosen = opts_.targets;
  int want = std::min(opts_.kappa, n_items_) - static_cast<int>(chosen.size());

  // weighted draws without replacement, weight = residual row norm
  std::vector<std::pair<int, double>> weighted;
  for (const auto& [item, row] : residual_.rows) {
    if (is_target_[static_cast<std::size_t>(item)]) continue;
    const double norm = l2_norm(row);
    if (norm > 0.0) weighted.emplace_back(item, norm);
  }
  while (want > 0 && !weighted.empty()) {
    double total = 0.0;
    for (const auto& [item, w] : weighted) total += w;
    const double r = rng_.uniform01() * total;
    double cum = 0.0;
    std::size_t pick = weighted.size() - 1;
    for (std::size_t i = 0; i < weighted.size(); ++i) {
      cum += weighted[i].second;
      if (r < cum) {
        pick = i;
        break;
      }
    }
    chosen.push_back(weighted[pick].first);
    weighted.erase(weighted.begin() + static_cast<std::ptrdiff_t>(pick));
    --want;
  }
  if (want > 0) {
    std::vector<char> taken(static_cast<std::size_t>(n_items_), 0);
    for (int j : chosen) taken[static_cast<std::size_t>(j)] = 1;
    std::vector<int> candidates;
    for (int j = 0; j < n_items_; ++j) {
      if (!taken[static_cast<std::size_t>(j)]) candidates.push_back(j);
    }
    const int pad = std::min(want, static_cast<int>(candidates.size()));
    auto extra = rng_.sample_from(candidates, pad);
    chosen.insert(chosen.end(), extra.begin(), extra.end());
  }
  std::sort(chosen.begin(), chosen.end());
  return item_sets_.emplace(client, std::move(chosen)).first->second;
}

GradientUpdate FedRecAttack::clipped_upload(int client) const {
  auto it = item_sets_.find(client);
  if (it == item_sets_.end()) throw std::logic_error("clipped_upload: item set not chosen yet");
  GradientUpdate up{client, SparseGrad(dim_)};
  for (int item : it->second) {
    const auto* row = residual_.find(item);
    if (row == nullptr) continue;
    const double norm = l2_norm(*row);
    if (norm == 0.0) continue;
    auto clipped = *row;
    if (norm > opts_.clip_norm) {
      const double scale = opts_.clip_norm / norm;
      for (double& x : clipped) x *= scale;
    }
    up.grad.rows.emplace(item, std::move(clipped));
  }
  return up;
}

void FedRecAttack::subtract_from_residual(const GradientUpdate& upload) {
  for (const auto& [item, row] : upload.grad.rows) {
    auto it = residual_.rows.find(item);
    if (it == residual_.rows.end()) continue;
    bool zero = true;
    for (std::size_t d = 0; d < row.size(); ++d) {
      it->second[d] -= row[d];
      if (it->second[d] != 0.0) zero = false;
    }
    if (zero) residual_.rows.erase(it);
  }
}

std::vector<GradientUpdate> FedRecAttack::round(const ItemMatrix& V, double /*eta*/, long /*t*/,
                                                std::span<const int> selected_malicious) {
  if (selected_malicious.empty() || !applicable()) return {};
  ensure_user_matrix();
  approximate_user_matrix(V, opts_.inner_steps, opts_.inner_eta);
  residual_ = poisoned_gradient(V);

  std::vector<int> order(selected_malicious.begin(), selected_malicious.end());
  std::sort(order.begin(), order.end());

  std::vector<GradientUpdate> uploads;
  uploads.reserve(order.size());
  for (int client : order) {
    item_set_for(client);
    auto up = clipped_upload(client);
    subtract_from_residual(up);
    uploads.push_back(std::move(up));
  }
  return uploads;
}

}  // namespace fedrec
