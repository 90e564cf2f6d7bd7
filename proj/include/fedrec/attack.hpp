#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedrec/fedsim.hpp"

namespace fedrec {

enum class AttackKind { none, random_fill, bandwagon, popular, fedrecattack };

AttackKind attack_kind_from_string(const std::string& s);
std::string_view to_string(AttackKind kind);

// Piecewise penalty on the score gap (threshold minus target): identity for
// non-negative gaps, exp(x)-1 for negative ones. Continuously differentiable,
// bounded below by -1, with vanishing slope far below zero.
double gap_penalty(double x);
double gap_penalty_derivative(double x);

// Fake interaction profiles for classical shilling baselines. Each profile
// holds the targets plus fillers, floor(kappa/2) items in total.
std::vector<FakeProfile> build_fake_profiles(AttackKind kind, const std::vector<long>& item_counts,
                                             const std::vector<int>& targets, int kappa, int count,
                                             Rng& rng);

// Data-poisoning baseline: injected clients carry fake profiles and run the
// ordinary local training protocol on them.
class ProfileAttack final : public AttackStrategy {
 public:
  ProfileAttack(AttackKind kind, std::vector<int> targets, int kappa, std::uint64_t seed);
  std::string_view name() const override { return to_string(kind_); }
  std::vector<FakeProfile> make_profiles(const std::vector<long>& item_counts,
                                         int count) override;

 private:
  AttackKind kind_;
  std::vector<int> targets_;
  int kappa_;
  Rng rng_;
};

struct FedRecAttackOptions {
  std::vector<int> targets;
  double zeta = 1.0;       // poisoned-gradient scale
  int kappa = 60;          // max non-zero rows per upload
  double clip_norm = 1.0;  // max row l2 norm per upload
  int rec_list_size = 10;  // recommendation-list length the attacker optimizes against
  int inner_steps = 30;    // user-matrix approximation sweeps per round
  double inner_eta = 0.01;
  std::uint64_t seed = 0;
};

// Gradient-fabricating adversary. Each round it re-approximates the private
// user matrix from the public interactions, differentiates a push-targets-
// into-top-K objective with respect to the item matrix, and spreads that
// gradient over the selected malicious clients within the row-count and
// row-norm limits, carrying the unsent remainder across clients.
class FedRecAttack final : public AttackStrategy {
 public:
  FedRecAttack(PublicView public_view, int n_items, int dim, FedRecAttackOptions opts);

  std::string_view name() const override { return "fedrecattack"; }
  std::vector<GradientUpdate> round(const ItemMatrix& V, double eta, long t,
                                    std::span<const int> selected_malicious) override;

  // With no public interactions the objective is empty; round() then uploads
  // nothing.
  bool applicable() const { return !public_.empty(); }

  // One additive term of the objective: penalty applied to
  // score(threshold_item) - score(target) for this user.
  struct LossTerm {
    int user = -1;
    int threshold_item = -1;
    int target = -1;
  };

  // SGD sweeps moving the approximate user matrix toward the BPR optimum for
  // the public interactions, with V fixed. Users without public interactions
  // keep their current row.
  void approximate_user_matrix(const ItemMatrix& V, int steps, double inner_eta);

  // Terms of the objective at the current approximate user matrix. Users
  // whose top-K consists entirely of targets are skipped (and counted).
  std::vector<LossTerm> collect_loss_terms(const ItemMatrix& V) const;
  double attack_loss(const ItemMatrix& V) const;

  // zeta times the gradient of attack_loss with respect to V, holding the
  // user matrix, the top-K sets, and the threshold choices fixed. Zero rows
  // are omitted.
  SparseGrad poisoned_gradient(const ItemMatrix& V) const;

  // The client's fixed item set: targets plus items drawn once, without
  // replacement, with probability proportional to the residual row norm
  // (uniform padding once norms are exhausted). Cached across rounds.
  const std::vector<int>& item_set_for(int client);

  // Residual restricted to the client's item set, rows clipped to clip_norm;
  // zero rows omitted.
  GradientUpdate clipped_upload(int client) const;

  void subtract_from_residual(const GradientUpdate& upload);

  const Matrix& user_matrix() const { return u_hat_; }
  const SparseGrad& residual() const { return residual_; }
  void set_residual(SparseGrad grad) { residual_ = std::move(grad); }
  long skipped_empty_threshold() const { return skipped_empty_threshold_; }
  const FedRecAttackOptions& options() const { return opts_; }

 private:
  void ensure_user_matrix();

  PublicView public_;
  int n_items_ = 0;
  int dim_ = 0;
  FedRecAttackOptions opts_;
  Rng rng_;
  std::vector<char> is_target_;
  Matrix u_hat_;
  bool u_hat_ready_ = false;
  SparseGrad residual_;
  std::map<int, std::vector<int>> item_sets_;
  mutable long skipped_empty_threshold_ = 0;
};

}  // namespace fedrec
