#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedrec {

enum class InteractionFormat { movielens_tab, csv };

InteractionFormat interaction_format_from_string(const std::string& s);

struct RawInteraction {
  std::string user;
  std::string item;
  std::optional<double> weight;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Implicit-feedback interaction set. Users and items are reindexed to dense
// 0-based ids in order of first appearance; original tokens are kept for
// round-tripping.
struct Dataset {
  int n_users = 0;
  int n_items = 0;
  std::vector<std::vector<int>> positives;  // per user, ascending item ids
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;

  std::size_t n_interactions() const;
  bool has_interaction(int user, int item) const;
  std::vector<long> item_counts() const;
};

// Leave-one-out split. `train` lives in the same index space as the source
// dataset; `test` maps each user that had at least two interactions to its
// single held-out item.
struct Split {
  Dataset train;
  std::map<int, int> test;
};

// The attacker-visible fraction of the training interactions.
struct PublicView {
  double xi = 0.0;
  std::vector<std::vector<int>> positives;  // per user, ascending item ids

  std::size_t total() const;
  bool has(int user, int item) const;
  bool empty() const { return total() == 0; }
};

// Round x to the nearest integer, halves away from zero toward +inf.
long round_half_up(double x);

std::vector<RawInteraction> load_interactions(const std::filesystem::path& path,
                                              InteractionFormat format);
void write_interactions(const std::filesystem::path& path,
                        const std::vector<RawInteraction>& raw,
                        InteractionFormat format);

Dataset build_dataset(const std::vector<RawInteraction>& raw);
Split leave_one_out(const Dataset& dataset, std::uint64_t seed);
PublicView sample_public(const Dataset& train, double xi, std::uint64_t seed);

// Everything needed to replay a split without rerunning the sampler.
struct SplitSidecar {
  std::uint64_t seed = 0;
  std::map<int, int> test;
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
};

void save_split_sidecar(const std::filesystem::path& path, const SplitSidecar& sidecar);
SplitSidecar load_split_sidecar(const std::filesystem::path& path);

}  // namespace fedrec
