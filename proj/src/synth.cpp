#include "fedrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedrec/model.hpp"
#include "fedrec/rng.hpp"

namespace fedrec {

namespace {

double gumbel(Rng& rng) {
  double u = rng.uniform01();
  while (u <= 0.0) u = rng.uniform01();
  return -std::log(-std::log(u));
}

}  // namespace

std::vector<RawInteraction> synthesize_interactions(const SynthSpec& spec) {
  if (spec.n_users < 1 || spec.n_items < 2) {
    throw std::invalid_argument("synthesize_interactions: corpus too small");
  }
  if (spec.min_per_user > spec.n_items) {
    throw std::invalid_argument("synthesize_interactions: min_per_user exceeds item count");
  }
  Rng rng(derive_seed(spec.seed, seed_tag::synth));

  const int n = spec.n_users;
  const int m = spec.n_items;
  const int d = spec.latent_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix P(n, d), Q(m, d);
  for (auto& x : P.a) x = rng.gaussian() * scale;
  for (auto& x : Q.a) x = rng.gaussian() * scale;
  std::vector<double> popularity(static_cast<std::size_t>(m));
  for (auto& x : popularity) x = rng.gaussian() * spec.popularity_spread;

  // Per-user counts: lognormal, clamped, then rescaled toward the requested
  // total.
  std::vector<long> counts(static_cast<std::size_t>(n));
  long total = 0;
  auto clamp_count = [&](double c) {
    long v = round_half_up(c);
    v = std::max<long>(v, spec.min_per_user);
    v = std::min<long>(v, std::min<long>(spec.max_per_user, m));
    return v;
  };
  for (auto& c : counts) {
    c = clamp_count(std::exp(rng.gaussian(spec.count_log_mu, spec.count_log_sigma)));
    total += c;
  }
  if (total > 0 && spec.target_interactions > 0) {
    const double factor = static_cast<double>(spec.target_interactions) / static_cast<double>(total);
    for (auto& c : counts) c = clamp_count(static_cast<double>(c) * factor);
  }

  std::vector<RawInteraction> raw;
  raw.reserve(static_cast<std::size_t>(spec.target_interactions));
  std::vector<std::pair<double, int>> keys(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) {
    const double* p = P.row(i);
    for (int j = 0; j < m; ++j) {
      double affinity = 0.0;
      const double* q = Q.row(j);
      for (int k = 0; k < d; ++k) affinity += p[k] * q[k];
      keys[static_cast<std::size_t>(j)] = {
          spec.signal * affinity + popularity[static_cast<std::size_t>(j)] + gumbel(rng), j};
    }
    const long c = counts[static_cast<std::size_t>(i)];
    std::partial_sort(keys.begin(), keys.begin() + c, keys.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (long r = 0; r < c; ++r) {
      raw.push_back({std::to_string(i + 1), std::to_string(keys[static_cast<std::size_t>(r)].second + 1),
                     1.0});
    }
  }
  return raw;
}

}  // namespace fedrec
