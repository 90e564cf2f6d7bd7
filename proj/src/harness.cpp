#include "fedrec/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fedrec {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    // stoull silently wraps negative input, so reject it up front
    if (value.find('-') != std::string::npos) throw std::invalid_argument("");
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) throw ConfigError("config key '" + key + "': empty list entry");
    out.push_back(to_int(key, part));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "dataset") cfg.dataset = value;
  else if (key == "format") cfg.format = value;
  else if (key == "attack") cfg.attack = value;
  else if (key == "k") cfg.k = to_int(key, value);
  else if (key == "eta") cfg.eta = to_double(key, value);
  else if (key == "xi") cfg.xi = to_double(key, value);
  else if (key == "rho") cfg.rho = to_double(key, value);
  else if (key == "kappa") cfg.kappa = to_int(key, value);
  else if (key == "C") cfg.clip_norm = to_double(key, value);
  else if (key == "zeta") cfg.zeta = to_double(key, value);
  else if (key == "mu") cfg.mu = to_double(key, value);
  else if (key == "epochs") cfg.epochs = to_int(key, value);
  else if (key == "batch_size") cfg.batch_size = to_int(key, value);
  else if (key == "eval_every") cfg.eval_every = to_int(key, value);
  else if (key == "eval_ks") cfg.eval_ks = to_int_list(key, value);
  else if (key == "targets") cfg.targets = value;
  else if (key == "seed_data") cfg.seed_data = to_u64(key, value);
  else if (key == "seed_model") cfg.seed_model = to_u64(key, value);
  else if (key == "seed_attack") cfg.seed_attack = to_u64(key, value);
  else if (key == "inner_steps") cfg.inner_steps = to_int(key, value);
  else if (key == "inner_eta") cfg.inner_eta = to_double(key, value);
  else if (key == "attack_top_k") cfg.attack_top_k = to_int(key, value);
  else if (key == "resample_negatives") cfg.resample_negatives = to_bool(key, value);
  else if (key == "report") cfg.report = value;
  else if (key == "sidecar") cfg.sidecar = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value, got '" + t + "'");
    }
    apply_override(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

int resolve_target_count(const ExperimentConfig& cfg) {
  const std::string& spec = cfg.targets;
  if (spec.rfind("cold:", 0) == 0) return to_int("targets", spec.substr(5));
  return static_cast<int>(to_int_list("targets", spec).size());
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError("config key 'dataset' is required");
  interaction_format_from_string(cfg.format);  // throws on bad value
  const AttackKind kind = attack_kind_from_string(cfg.attack);
  if (cfg.k < 1) throw ConfigError("config key 'k' must be >= 1");
  if (cfg.eta <= 0.0) throw ConfigError("config key 'eta' must be positive");
  if (cfg.xi < 0.0 || cfg.xi > 1.0) throw ConfigError("config key 'xi' must lie in [0, 1]");
  if (cfg.rho < 0.0 || cfg.rho > 1.0) throw ConfigError("config key 'rho' must lie in [0, 1]");
  if (cfg.clip_norm <= 0.0) throw ConfigError("config key 'C' must be positive");
  if (cfg.zeta < 0.0) throw ConfigError("config key 'zeta' must be >= 0");
  if (cfg.mu < 0.0) throw ConfigError("config key 'mu' must be >= 0");
  if (cfg.epochs < 0) throw ConfigError("config key 'epochs' must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("config key 'batch_size' must be >= 1");
  if (cfg.eval_every < 1) throw ConfigError("config key 'eval_every' must be >= 1");
  for (int k : cfg.eval_ks) {
    if (k < 1) throw ConfigError("config key 'eval_ks' entries must be >= 1");
  }
  if (cfg.inner_steps < 0) throw ConfigError("config key 'inner_steps' must be >= 0");
  if (cfg.inner_eta < 0.0) throw ConfigError("config key 'inner_eta' must be >= 0");
  if (cfg.attack_top_k < 1) throw ConfigError("config key 'attack_top_k' must be >= 1");

  const int n_targets = resolve_target_count(cfg);
  if (n_targets < 1) throw ConfigError("config key 'targets' must name at least one item");
  if (kind != AttackKind::none && cfg.kappa < 2 * n_targets) {
    throw ConfigError("config key 'kappa' must be at least twice the target count");
  }
}

std::vector<int> resolve_targets(const std::string& spec, const Dataset& train,
                                 std::uint64_t seed_attack) {
  std::vector<int> targets;
  if (spec.rfind("cold:", 0) == 0) {
    const int want = to_int("targets", spec.substr(5));
    if (want < 1) throw ConfigError("config key 'targets': cold count must be >= 1");
    const auto counts = train.item_counts();
    std::vector<int> cold;
    for (int j = 0; j < train.n_items; ++j) {
      if (counts[static_cast<std::size_t>(j)] < 10) cold.push_back(j);
    }
    if (static_cast<int>(cold.size()) < want) {
      throw ConfigError("config key 'targets': fewer than " + std::to_string(want) +
                        " cold items (under 10 interactions) in the training set");
    }
    Rng rng(derive_seed(seed_attack, seed_tag::targets));
    targets = rng.sample_from(cold, want);
  } else {
    targets = to_int_list("targets", spec);
    for (int t : targets) {
      if (t < 0 || t >= train.n_items) {
        throw ConfigError("config key 'targets': item " + std::to_string(t) + " out of range");
      }
    }
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  return targets;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::ostringstream canon;
  canon << "dataset=" << cfg.dataset << ";format=" << cfg.format << ";attack=" << cfg.attack
        << ";k=" << cfg.k << ";eta=" << fmt("%.17g", cfg.eta) << ";xi=" << fmt("%.17g", cfg.xi)
        << ";rho=" << fmt("%.17g", cfg.rho) << ";kappa=" << cfg.kappa
        << ";C=" << fmt("%.17g", cfg.clip_norm) << ";zeta=" << fmt("%.17g", cfg.zeta)
        << ";mu=" << fmt("%.17g", cfg.mu) << ";epochs=" << cfg.epochs
        << ";batch_size=" << cfg.batch_size << ";eval_every=" << cfg.eval_every << ";eval_ks=";
  for (std::size_t i = 0; i < cfg.eval_ks.size(); ++i) {
    if (i) canon << ',';
    canon << cfg.eval_ks[i];
  }
  canon << ";targets=" << cfg.targets << ";seed_data=" << cfg.seed_data
        << ";seed_model=" << cfg.seed_model << ";seed_attack=" << cfg.seed_attack
        << ";inner_steps=" << cfg.inner_steps << ";inner_eta=" << fmt("%.17g", cfg.inner_eta)
        << ";attack_top_k=" << cfg.attack_top_k
        << ";resample_negatives=" << (cfg.resample_negatives ? 1 : 0);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentRun run_experiment_full(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  const auto raw = load_interactions(cfg.dataset, interaction_format_from_string(cfg.format));
  const Dataset ds = build_dataset(raw);
  const Split split = leave_one_out(ds, cfg.seed_data);
  const PublicView pub = sample_public(split.train, cfg.xi, cfg.seed_data);
  const std::vector<int> targets = resolve_targets(cfg.targets, split.train, cfg.seed_attack);

  const AttackKind kind = attack_kind_from_string(cfg.attack);
  std::unique_ptr<AttackStrategy> attack;
  switch (kind) {
    case AttackKind::none:
      attack = std::make_unique<NullAttack>();
      break;
    case AttackKind::random_fill:
    case AttackKind::bandwagon:
    case AttackKind::popular:
      attack = std::make_unique<ProfileAttack>(kind, targets, cfg.kappa,
                                               derive_seed(cfg.seed_attack, seed_tag::profiles));
      break;
    case AttackKind::fedrecattack: {
      FedRecAttackOptions opts;
      opts.targets = targets;
      opts.zeta = cfg.zeta;
      opts.kappa = cfg.kappa;
      opts.clip_norm = cfg.clip_norm;
      opts.rec_list_size = cfg.attack_top_k;
      opts.inner_steps = cfg.inner_steps;
      opts.inner_eta = cfg.inner_eta > 0.0 ? cfg.inner_eta : cfg.eta;
      opts.seed = cfg.seed_attack;
      attack = std::make_unique<FedRecAttack>(pub, split.train.n_items, cfg.k, std::move(opts));
      break;
    }
  }

  SimOptions so;
  so.dim = cfg.k;
  so.eta = cfg.eta;
  so.clip_norm = cfg.clip_norm;
  so.noise_scale = cfg.mu;
  so.kappa = cfg.kappa;
  so.batch_size = cfg.batch_size;
  so.epochs = cfg.epochs;
  so.eval_every = cfg.eval_every;
  so.eval_ks = cfg.eval_ks;
  so.resample_negatives = cfg.resample_negatives;
  so.n_malicious =
      kind == AttackKind::none
          ? 0
          : static_cast<int>(std::ceil(cfg.rho * split.train.n_users - 1e-9));

  auto result = run_training(so, split, targets, *attack, cfg.seed_model);

  if (!cfg.report.empty()) write_report_jsonl(cfg.report, result.snapshots);
  if (!cfg.sidecar.empty()) {
    SplitSidecar sc;
    sc.seed = cfg.seed_data;
    sc.test = split.test;
    sc.user_tokens = ds.user_tokens;
    sc.item_tokens = ds.item_tokens;
    save_split_sidecar(cfg.sidecar, sc);
  }

  const auto& last = result.snapshots.back();
  ExperimentRun run;
  run.snapshots = result.snapshots;
  run.targets = targets;
  ResultRow& row = run.row;
  row.dataset = cfg.dataset;
  row.attack = cfg.attack;
  row.k = cfg.k;
  row.eta = cfg.eta;
  row.xi = cfg.xi;
  row.rho = cfg.rho;
  row.kappa = cfg.kappa;
  row.clip_norm = cfg.clip_norm;
  row.zeta = cfg.zeta;
  row.mu = cfg.mu;
  row.epochs = cfg.epochs;
  row.seed_data = cfg.seed_data;
  row.seed_model = cfg.seed_model;
  row.seed_attack = cfg.seed_attack;
  row.er5 = last.er.count(5) ? last.er.at(5) : 0.0;
  row.er10 = last.er.count(10) ? last.er.at(10) : 0.0;
  row.ndcg10 = last.ndcg.count(10) ? last.ndcg.at(10) : 0.0;
  row.hr10 = last.hr.count(10) ? last.hr.at(10) : 0.0;
  row.hash = config_hash(cfg);
  row.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

ResultRow run_experiment(const ExperimentConfig& cfg) { return run_experiment_full(cfg).row; }

ResultTable run_grid(const ExperimentConfig& base, const std::string& axis_key,
                     std::vector<std::string> axis_values) {
  const bool numeric = std::all_of(axis_values.begin(), axis_values.end(), [](const std::string& v) {
    try {
      std::size_t pos = 0;
      std::stod(v, &pos);
      return pos == v.size();
    } catch (const std::exception&) {
      return false;
    }
  });
  if (numeric) {
    std::sort(axis_values.begin(), axis_values.end(),
              [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
  } else {
    std::sort(axis_values.begin(), axis_values.end());
  }

  ResultTable table;
  for (const auto& value : axis_values) {
    ExperimentConfig cfg = base;
    apply_override(cfg, axis_key, value);
    table.rows.push_back(run_experiment(cfg));
  }
  return table;
}

static const char* kCsvHeader =
    "dataset,attack,k,eta,xi,rho,kappa,C,zeta,mu,epochs,seed_data,seed_model,seed_attack,"
    "ER@5,ER@10,NDCG@10,HR@10,wall_s,config_hash";

std::string to_csv(const ResultTable& table) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    out << csv_escape(r.dataset) << ',' << csv_escape(r.attack) << ',' << r.k << ','
        << fmt("%.10g", r.eta) << ',' << fmt("%.10g", r.xi) << ',' << fmt("%.10g", r.rho) << ','
        << r.kappa << ',' << fmt("%.10g", r.clip_norm) << ',' << fmt("%.10g", r.zeta) << ','
        << fmt("%.10g", r.mu) << ',' << r.epochs << ',' << r.seed_data << ',' << r.seed_model
        << ',' << r.seed_attack << ',' << fmt("%.4f", r.er5) << ',' << fmt("%.4f", r.er10) << ','
        << fmt("%.4f", r.ndcg10) << ',' << fmt("%.4f", r.hr10) << ',' << fmt("%.3f", r.wall_s)
        << ',' << r.hash << '\n';
  }
  return out.str();
}

namespace {

nlohmann::ordered_json row_to_json(const ResultRow& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["attack"] = r.attack;
  j["k"] = r.k;
  j["eta"] = r.eta;
  j["xi"] = r.xi;
  j["rho"] = r.rho;
  j["kappa"] = r.kappa;
  j["C"] = r.clip_norm;
  j["zeta"] = r.zeta;
  j["mu"] = r.mu;
  j["epochs"] = r.epochs;
  j["seed_data"] = r.seed_data;
  j["seed_model"] = r.seed_model;
  j["seed_attack"] = r.seed_attack;
  j["ER@5"] = r.er5;
  j["ER@10"] = r.er10;
  j["NDCG@10"] = r.ndcg10;
  j["HR@10"] = r.hr10;
  j["wall_s"] = r.wall_s;
  j["config_hash"] = r.hash;
  return j;
}

ResultRow row_from_json(const nlohmann::json& j) {
  ResultRow r;
  r.dataset = j.at("dataset").get<std::string>();
  r.attack = j.at("attack").get<std::string>();
  r.k = j.at("k").get<int>();
  r.eta = j.at("eta").get<double>();
  r.xi = j.at("xi").get<double>();
  r.rho = j.at("rho").get<double>();
  r.kappa = j.at("kappa").get<int>();
  r.clip_norm = j.at("C").get<double>();
  r.zeta = j.at("zeta").get<double>();
  r.mu = j.at("mu").get<double>();
  r.epochs = j.at("epochs").get<int>();
  r.seed_data = j.at("seed_data").get<std::uint64_t>();
  r.seed_model = j.at("seed_model").get<std::uint64_t>();
  r.seed_attack = j.at("seed_attack").get<std::uint64_t>();
  r.er5 = j.at("ER@5").get<double>();
  r.er10 = j.at("ER@10").get<double>();
  r.ndcg10 = j.at("NDCG@10").get<double>();
  r.hr10 = j.at("HR@10").get<double>();
  r.wall_s = j.at("wall_s").get<double>();
  r.hash = j.at("config_hash").get<std::string>();
  return r;
}

}  // namespace

std::string to_json(const ResultTable& table) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) arr.push_back(row_to_json(r));
  return arr.dump(2) + "\n";
}

ResultTable parse_results_json(const std::string& text) {
  ResultTable table;
  const auto arr = nlohmann::json::parse(text);
  for (const auto& j : arr) table.rows.push_back(row_from_json(j));
  return table;
}

void write_results(const std::filesystem::path& path, const ResultTable& table,
                   const std::string& format) {
  std::string body;
  if (format == "csv") {
    body = to_csv(table);
  } else if (format == "json") {
    body = to_json(table);
  } else {
    throw ConfigError("unknown output format '" + format + "'");
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << body;
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

bool operator==(const ResultRow& a, const ResultRow& b) {
  return a.dataset == b.dataset && a.attack == b.attack && a.k == b.k && a.eta == b.eta &&
         a.xi == b.xi && a.rho == b.rho && a.kappa == b.kappa && a.clip_norm == b.clip_norm &&
         a.zeta == b.zeta && a.mu == b.mu && a.epochs == b.epochs && a.seed_data == b.seed_data &&
         a.seed_model == b.seed_model && a.seed_attack == b.seed_attack && a.er5 == b.er5 &&
         a.er10 == b.er10 && a.ndcg10 == b.ndcg10 && a.hr10 == b.hr10 && a.wall_s == b.wall_s &&
         a.hash == b.hash;
}

}  // namespace fedrec
