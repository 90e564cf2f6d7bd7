#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedrec/dataset.hpp"
#include "fedrec/metrics.hpp"
#include "fedrec/model.hpp"
#include "fedrec/rng.hpp"

namespace fedrec {

// Server-side state: the shared item matrix plus the aggregation counter.
struct ServerState {
  ItemMatrix V;
  long iteration = 0;
  double eta = 0.01;
};

// One participant. Benign clients (and data-poisoning fakes) hold a private
// user vector and train on their own interactions; gradient-fabricating
// malicious clients hold neither and produce uploads through the attack hook.
struct ClientState {
  int user_index = -1;
  UserVector u;
  std::vector<int> positives;  // ascending
  std::vector<int> negatives;  // sampled once at setup, in draw order
  PairSet pairs;
  bool is_malicious = false;
  bool trains_locally = true;
};

struct GradientUpdate {
  int sender = -1;
  SparseGrad grad;
};

struct RoundReport {
  long t = 0;
  int epoch = 0;
  std::vector<int> selected_benign;
  std::vector<int> selected_malicious;
};

// A fake interaction profile for one injected client.
struct FakeProfile {
  std::vector<int> positives;
};

// Attack strategy interface. Implementations see only what a real adversary
// would: the shared item matrix, protocol constants, and their own clients.
class AttackStrategy {
 public:
  virtual ~AttackStrategy() = default;
  virtual std::string_view name() const = 0;

  // Fake profiles for `count` injected clients. An empty result means the
  // injected clients carry no interactions and fabricate uploads via round().
  virtual std::vector<FakeProfile> make_profiles(const std::vector<long>& item_counts, int count);

  // Called once per round with the fabricating malicious clients selected
  // this round (ascending ids). Returns their uploads.
  virtual std::vector<GradientUpdate> round(const ItemMatrix& V, double eta, long t,
                                            std::span<const int> selected_malicious);
};

// No adversary; injected-client count should be zero under this strategy.
class NullAttack final : public AttackStrategy {
 public:
  std::string_view name() const override { return "none"; }
};

struct BatchSelection {
  std::vector<int> benign;
  std::vector<int> malicious;
};

// Uniform sample of batch_size distinct clients, partitioned by flag, each
// part ascending.
BatchSelection select_batch(const std::vector<ClientState>& clients, int batch_size, Rng& rng);

// One local training step: compute pair gradients at the current state, clip
// item rows to clip_norm, add per-entry gaussian noise of scale
// noise_scale*clip_norm, apply the (unclipped, unnoised) user gradient
// locally, and return the item update for upload.
GradientUpdate benign_client_step(ClientState& client, const ItemMatrix& V, double eta,
                                  double clip_norm, double noise_scale, Rng& rng);

// Scale any row with l2 norm above clip_norm back onto the ball.
void clip_rows(SparseGrad& grad, double clip_norm);

struct UploadLimits {
  int kappa = 0;
  double clip_norm = 0.0;
};

// Apply V -= eta * sum of updates, in canonical (ascending sender) order.
// When `limits` is given, updates from senders flagged in `malicious_senders`
// must respect them; a violation throws.
void aggregate(ServerState& server, std::vector<GradientUpdate> updates,
               const std::vector<char>* malicious_senders = nullptr,
               const UploadLimits* limits = nullptr);

struct SimOptions {
  int dim = 32;
  double eta = 0.01;
  double clip_norm = 1.0;
  double noise_scale = 0.0;
  int kappa = 60;
  int n_malicious = 0;
  int batch_size = 256;
  int epochs = 200;
  int eval_every = 10;
  std::vector<int> eval_ks = {5, 10};
  bool resample_negatives = false;
  bool record_rounds = false;
};

struct TrainingResult {
  ServerState server;
  std::vector<ClientState> clients;
  std::vector<RoundReport> rounds;
  std::vector<MetricSnapshot> snapshots;  // epoch 0, every eval_every epochs, final
};

// Full federated run: one shuffled pass over all clients per epoch, in
// batches of batch_size; malicious uploads are produced by `attack`.
TrainingResult run_training(const SimOptions& opts, const Split& split,
                            const std::vector<int>& targets, AttackStrategy& attack,
                            std::uint64_t model_seed);

// One snapshot per line: {"t":..,"epoch":..,"HR@10":..,"ER@5":..,"ER@10":..,"NDCG@10":..}.
void write_report_jsonl(const std::filesystem::path& path,
                        const std::vector<MetricSnapshot>& snapshots);

}  // namespace fedrec
