#include "fedrec/fedsim.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fedrec {

std::vector<FakeProfile> AttackStrategy::make_profiles(const std::vector<long>&, int) {
  return {};
}

std::vector<GradientUpdate> AttackStrategy::round(const ItemMatrix&, double, long,
                                                  std::span<const int>) {
  return {};
}

BatchSelection select_batch(const std::vector<ClientState>& clients, int batch_size, Rng& rng) {
  const int n = static_cast<int>(clients.size());
  if (batch_size < 1 || batch_size > n) {
    throw std::invalid_argument("select_batch: batch_size out of range");
  }
  auto picks = rng.sample_indices(n, batch_size);
  BatchSelection sel;
  for (int id : picks) {
    (clients[static_cast<std::size_t>(id)].is_malicious ? sel.malicious : sel.benign)
        .push_back(id);
  }
  std::sort(sel.benign.begin(), sel.benign.end());
  std::sort(sel.malicious.begin(), sel.malicious.end());
  return sel;
}

void clip_rows(SparseGrad& grad, double clip_norm) {
  if (clip_norm <= 0.0) throw std::invalid_argument("clip_rows: clip_norm must be positive");
  for (auto& [item, row] : grad.rows) {
    const double norm = l2_norm(row);
    if (norm > clip_norm) {
      const double scale = clip_norm / norm;
      for (double& x : row) x *= scale;
    }
  }
}

GradientUpdate benign_client_step(ClientState& client, const ItemMatrix& V, double eta,
                                  double clip_norm, double noise_scale, Rng& rng) {
  std::vector<double> grad_user;
  SparseGrad grad_items(V.cols);
  bpr_gradients(client.u.values, V, client.pairs, grad_user, grad_items);

  clip_rows(grad_items, clip_norm);
  if (noise_scale > 0.0) {
    const double sigma = noise_scale * clip_norm;
    for (auto& [item, row] : grad_items.rows) {
      for (double& x : row) x += rng.gaussian(0.0, sigma);
    }
  }

  for (std::size_t d = 0; d < client.u.values.size(); ++d) {
    client.u.values[d] -= eta * grad_user[d];
  }
  return {client.user_index, std::move(grad_items)};
}

void aggregate(ServerState& server, std::vector<GradientUpdate> updates,
               const std::vector<char>* malicious_senders, const UploadLimits* limits) {
  std::sort(updates.begin(), updates.end(),
            [](const GradientUpdate& a, const GradientUpdate& b) { return a.sender < b.sender; });
  for (const auto& up : updates) {
    const bool check =
        limits != nullptr && malicious_senders != nullptr && up.sender >= 0 &&
        up.sender < static_cast<int>(malicious_senders->size()) &&
        (*malicious_senders)[static_cast<std::size_t>(up.sender)] != 0;
    if (check) {
      int nonzero = 0;
      for (const auto& [item, row] : up.grad.rows) {
        const double norm = l2_norm(row);
        if (norm > 0.0) ++nonzero;
        if (norm > limits->clip_norm * (1.0 + 1e-9) + 1e-12) {
          throw std::runtime_error("aggregate: malicious upload exceeds row norm limit");
        }
      }
      if (nonzero > limits->kappa) {
        throw std::runtime_error("aggregate: malicious upload exceeds row count limit");
      }
    }
    for (const auto& [item, row] : up.grad.rows) {
      if (item < 0 || item >= server.V.rows) {
        throw std::out_of_range("aggregate: update row index out of range");
      }
      if (static_cast<int>(row.size()) != server.V.cols) {
        throw std::invalid_argument("aggregate: update row dimension mismatch");
      }
      double* v = server.V.row(item);
      for (int d = 0; d < server.V.cols; ++d) {
        v[d] -= server.eta * row[static_cast<std::size_t>(d)];
      }
    }
  }
  ++server.iteration;
}

namespace {

// Sample one negative per positive (capped by the complement size) and pair
// them up. Resampling replaces negatives and pairs wholesale.
void assign_pairs(ClientState& client, int n_items, Rng& rng) {
  const auto& pos = client.positives;
  std::vector<int> complement;
  complement.reserve(static_cast<std::size_t>(n_items) - pos.size());
  std::size_t p = 0;
  for (int j = 0; j < n_items; ++j) {
    if (p < pos.size() && pos[p] == j) {
      ++p;
      continue;
    }
    complement.push_back(j);
  }
  const int want = static_cast<int>(std::min(pos.size(), complement.size()));
  client.negatives = rng.sample_from(complement, want);
  client.pairs.pairs.clear();
  client.pairs.pairs.reserve(static_cast<std::size_t>(want));
  for (int i = 0; i < want; ++i) {
    client.pairs.pairs.emplace_back(pos[static_cast<std::size_t>(i)],
                                    client.negatives[static_cast<std::size_t>(i)]);
  }
}

std::uint64_t pair_seed(std::uint64_t model_seed, int client, int epoch) {
  return derive_seed(derive_seed(model_seed, seed_tag::negatives, static_cast<std::uint64_t>(client)),
                     static_cast<std::uint64_t>(epoch));
}

}  // namespace

TrainingResult run_training(const SimOptions& opts, const Split& split,
                            const std::vector<int>& targets, AttackStrategy& attack,
                            std::uint64_t model_seed) {
  const Dataset& train = split.train;
  const int n = train.n_users;
  const int m = train.n_items;
  if (opts.batch_size < 1) throw std::invalid_argument("run_training: batch_size must be >= 1");
  if (opts.dim < 1) throw std::invalid_argument("run_training: dim must be >= 1");

  TrainingResult res;
  res.server.eta = opts.eta;
  {
    Rng rng(derive_seed(model_seed, seed_tag::item_init));
    res.server.V = init_embeddings(m, opts.dim, rng);
  }

  auto& clients = res.clients;
  clients.reserve(static_cast<std::size_t>(n + opts.n_malicious));
  for (int i = 0; i < n; ++i) {
    ClientState c;
    c.user_index = i;
    c.u.owner = i;
    Rng rng(derive_seed(model_seed, seed_tag::user_init, static_cast<std::uint64_t>(i)));
    c.u.values = init_embedding_row(opts.dim, rng);
    c.positives = train.positives[static_cast<std::size_t>(i)];
    clients.push_back(std::move(c));
  }

  auto profiles = attack.make_profiles(train.item_counts(), opts.n_malicious);
  if (!profiles.empty() && static_cast<int>(profiles.size()) != opts.n_malicious) {
    throw std::logic_error("run_training: attack produced wrong number of profiles");
  }
  for (int j = 0; j < opts.n_malicious; ++j) {
    ClientState c;
    c.user_index = n + j;
    c.u.owner = n + j;
    c.is_malicious = true;
    if (!profiles.empty()) {
      c.positives = profiles[static_cast<std::size_t>(j)].positives;
      std::sort(c.positives.begin(), c.positives.end());
      c.positives.erase(std::unique(c.positives.begin(), c.positives.end()), c.positives.end());
      Rng rng(derive_seed(model_seed, seed_tag::user_init, static_cast<std::uint64_t>(n + j)));
      c.u.values = init_embedding_row(opts.dim, rng);
    } else {
      c.trains_locally = false;
    }
    clients.push_back(std::move(c));
  }

  for (auto& c : clients) {
    if (c.trains_locally && !c.positives.empty()) {
      Rng rng(pair_seed(model_seed, c.user_index, 0));
      assign_pairs(c, m, rng);
    }
  }

  std::vector<char> is_malicious(clients.size(), 0);
  for (std::size_t i = 0; i < clients.size(); ++i) is_malicious[i] = clients[i].is_malicious;
  const UploadLimits limits{opts.kappa, opts.clip_norm};

  auto evaluate = [&](long t, int epoch) {
    Matrix users(n, opts.dim);
    for (int i = 0; i < n; ++i) {
      std::copy(clients[static_cast<std::size_t>(i)].u.values.begin(),
                clients[static_cast<std::size_t>(i)].u.values.end(), users.row(i));
    }
    return evaluate_all(users, res.server.V, split, targets, opts.eval_ks, t, epoch);
  };

  res.snapshots.push_back(evaluate(0, 0));

  const int total = static_cast<int>(clients.size());
  std::vector<int> order(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (opts.resample_negatives && epoch > 0) {
      for (auto& c : clients) {
        if (c.trains_locally && !c.positives.empty()) {
          Rng rng(pair_seed(model_seed, c.user_index, epoch));
          assign_pairs(c, m, rng);
        }
      }
    }
    {
      Rng rng(derive_seed(model_seed, seed_tag::shuffle, static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order);
    }
    for (int start = 0; start < total; start += opts.batch_size) {
      const int end = std::min(start + opts.batch_size, total);
      const long t = res.server.iteration + 1;
      RoundReport rep;
      rep.t = t;
      rep.epoch = epoch;
      for (int i = start; i < end; ++i) {
        const int id = order[static_cast<std::size_t>(i)];
        (clients[static_cast<std::size_t>(id)].is_malicious ? rep.selected_malicious
                                                            : rep.selected_benign)
            .push_back(id);
      }
      std::sort(rep.selected_benign.begin(), rep.selected_benign.end());
      std::sort(rep.selected_malicious.begin(), rep.selected_malicious.end());

      std::vector<GradientUpdate> updates;
      updates.reserve(static_cast<std::size_t>(end - start));
      std::vector<int> fabricating;
      auto step = [&](int id) {
        auto& c = clients[static_cast<std::size_t>(id)];
        if (c.pairs.pairs.empty()) return;
        Rng rng(derive_seed(derive_seed(model_seed, seed_tag::client_step,
                                        static_cast<std::uint64_t>(id)),
                            static_cast<std::uint64_t>(t)));
        // Gradient noise protects real users' data; clients under the
        // attacker's control do not add it.
        const double noise = c.is_malicious ? 0.0 : opts.noise_scale;
        updates.push_back(benign_client_step(c, res.server.V, opts.eta, opts.clip_norm,
                                             noise, rng));
      };
      for (int id : rep.selected_benign) step(id);
      for (int id : rep.selected_malicious) {
        if (clients[static_cast<std::size_t>(id)].trains_locally) {
          step(id);
        } else {
          fabricating.push_back(id);
        }
      }
      if (!fabricating.empty()) {
        auto forged = attack.round(res.server.V, opts.eta, t, fabricating);
        for (auto& up : forged) updates.push_back(std::move(up));
      }

      aggregate(res.server, std::move(updates), &is_malicious, &limits);
      if (opts.record_rounds) res.rounds.push_back(std::move(rep));
    }
    const int done = epoch + 1;
    if (done % opts.eval_every == 0 || done == opts.epochs) {
      res.snapshots.push_back(evaluate(res.server.iteration, done));
    }
  }
  return res;
}

void write_report_jsonl(const std::filesystem::path& path,
                        const std::vector<MetricSnapshot>& snapshots) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open report '" + path.string() + "' for writing");
  for (const auto& s : snapshots) {
    nlohmann::ordered_json j;
    j["t"] = s.t;
    j["epoch"] = s.epoch;
    j["HR@10"] = s.hr.count(10) ? s.hr.at(10) : 0.0;
    j["ER@5"] = s.er.count(5) ? s.er.at(5) : 0.0;
    j["ER@10"] = s.er.count(10) ? s.er.at(10) : 0.0;
    j["NDCG@10"] = s.ndcg.count(10) ? s.ndcg.at(10) : 0.0;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace fedrec
