#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fedrec/attack.hpp"
#include "fedrec/dataset.hpp"
#include "fedrec/fedsim.hpp"
#include "fedrec/synth.hpp"

namespace fedrec {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat experiment description. Every knob of a run lives here so one config
// hash identifies the experiment.
struct ExperimentConfig {
  std::string dataset;  // path to the interaction file
  std::string format = "movielens_tab";
  std::string attack = "none";
  int k = 32;
  double eta = 0.01;
  double xi = 0.01;
  double rho = 0.05;
  int kappa = 60;
  double clip_norm = 1.0;  // key: C
  double zeta = 1.0;
  double mu = 0.0;
  int epochs = 200;
  int batch_size = 256;
  int eval_every = 10;
  std::vector<int> eval_ks = {5, 10};
  std::string targets = "cold:1";  // "cold:N" or explicit ids "3,17"
  std::uint64_t seed_data = 1;
  std::uint64_t seed_model = 2;
  std::uint64_t seed_attack = 3;
  int inner_steps = 30;
  double inner_eta = 0.0;  // 0 means follow eta
  int attack_top_k = 10;
  bool resample_negatives = false;
  std::string report;   // optional jsonl metrics path
  std::string sidecar;  // optional split sidecar path
};

// Parse `key=value` lines ('#' comments and blank lines allowed). Unknown
// keys are errors.
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void validate(const ExperimentConfig& cfg);

int resolve_target_count(const ExperimentConfig& cfg);
std::vector<int> resolve_targets(const std::string& spec, const Dataset& train,
                                 std::uint64_t seed_attack);

// FNV-1a over the canonical rendering of the semantic fields (output paths
// excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct ResultRow {
  std::string dataset;
  std::string attack;
  int k = 0;
  double eta = 0.0;
  double xi = 0.0;
  double rho = 0.0;
  int kappa = 0;
  double clip_norm = 0.0;
  double zeta = 0.0;
  double mu = 0.0;
  int epochs = 0;
  std::uint64_t seed_data = 0;
  std::uint64_t seed_model = 0;
  std::uint64_t seed_attack = 0;
  double er5 = 0.0;
  double er10 = 0.0;
  double ndcg10 = 0.0;
  double hr10 = 0.0;
  double wall_s = 0.0;
  std::string hash;
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

struct ExperimentRun {
  ResultRow row;
  std::vector<MetricSnapshot> snapshots;
  std::vector<int> targets;
};

ExperimentRun run_experiment_full(const ExperimentConfig& cfg);
ResultRow run_experiment(const ExperimentConfig& cfg);

// One run per axis value, ascending (numeric order when every value parses
// as a number, lexicographic otherwise).
ResultTable run_grid(const ExperimentConfig& base, const std::string& axis_key,
                     std::vector<std::string> axis_values);

std::string to_csv(const ResultTable& table);
std::string to_json(const ResultTable& table);
ResultTable parse_results_json(const std::string& text);
void write_results(const std::filesystem::path& path, const ResultTable& table,
                   const std::string& format);

bool operator==(const ResultRow& a, const ResultRow& b);

}  // namespace fedrec
