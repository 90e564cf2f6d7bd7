#pragma once

#include <cstdint>
#include <vector>

#include "fedrec/dataset.hpp"

namespace fedrec {

// Shape parameters of the synthetic implicit-feedback corpus. Defaults mirror
// a small movie-rating benchmark: ~10^5 interactions over 943 users and 1682
// items, at least 20 interactions per user, a long-tailed item distribution
// with cold items, and a learnable low-rank preference structure.
struct SynthSpec {
  int n_users = 943;
  int n_items = 1682;
  long target_interactions = 100000;
  int latent_dim = 4;
  double signal = 8.0;             // weight of the low-rank preference term
  double popularity_spread = 4.5;  // stddev of per-item log-popularity
  int min_per_user = 20;
  int max_per_user = 600;
  double count_log_mu = 4.17;     // ln of the median per-user count
  double count_log_sigma = 0.75;
  std::uint64_t seed = 1;
};

std::vector<RawInteraction> synthesize_interactions(const SynthSpec& spec);

}  // namespace fedrec
