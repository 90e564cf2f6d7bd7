#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedrec/harness.hpp"

namespace {

void apply_sets(fedrec::ExperimentConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw fedrec::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    fedrec::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void print_row(const fedrec::ResultRow& row) {
  std::printf("%s attack=%s ER@5=%.4f ER@10=%.4f NDCG@10=%.4f HR@10=%.4f wall=%.1fs\n",
              row.dataset.c_str(), row.attack.c_str(), row.er5, row.er10, row.ndcg10, row.hr10,
              row.wall_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated matrix-factorization recommender with poisoning attacks"};
  app.require_subcommand(1);

  std::string config_path, out_path, format = "csv", axis;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config_path, "key=value config file")->required();
  run->add_option("--set", sets, "override a config key (key=value, repeatable)");
  run->add_option("--out", out_path, "result file")->required();
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* sweep = app.add_subcommand("sweep", "Run one experiment per axis value");
  sweep->add_option("--config", config_path, "key=value config file")->required();
  sweep->add_option("--set", sets, "override a config key (key=value, repeatable)");
  sweep->add_option("--axis", axis, "key=v1,v2,... sweep axis")->required();
  sweep->add_option("--out", out_path, "result file")->required();
  sweep->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  fedrec::SynthSpec spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic interaction corpus");
  gen->add_option("--out", gen_out, "interaction file (tab-separated)")->required();
  gen->add_option("--users", spec.n_users, "number of users");
  gen->add_option("--items", spec.n_items, "number of items");
  gen->add_option("--interactions", spec.target_interactions, "approximate interaction count");
  gen->add_option("--seed", spec.seed, "generator seed");
  gen->add_option("--latent-dim", spec.latent_dim, "latent preference dimension");
  gen->add_option("--signal", spec.signal, "preference signal strength");
  gen->add_option("--popularity", spec.popularity_spread, "item popularity spread");
  gen->add_option("--min-per-user", spec.min_per_user, "minimum interactions per user");
  gen->add_option("--max-per-user", spec.max_per_user, "maximum interactions per user");
  gen->add_option("--count-log-mu", spec.count_log_mu, "ln of the median per-user count");
  gen->add_option("--count-log-sigma", spec.count_log_sigma, "spread of per-user counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = fedrec::load_config(config_path);
      apply_sets(cfg, sets);
      fedrec::ResultTable table;
      table.rows.push_back(fedrec::run_experiment(cfg));
      fedrec::write_results(out_path, table, format);
      print_row(table.rows.front());
    } else if (sweep->parsed()) {
      auto cfg = fedrec::load_config(config_path);
      apply_sets(cfg, sets);
      const auto eq = axis.find('=');
      if (eq == std::string::npos) {
        throw fedrec::ConfigError("--axis expects key=v1,v2,..., got '" + axis + "'");
      }
      const std::string key = axis.substr(0, eq);
      std::vector<std::string> values;
      std::string part;
      std::stringstream ss(axis.substr(eq + 1));
      while (std::getline(ss, part, ',')) values.push_back(part);
      if (values.empty()) throw fedrec::ConfigError("--axis has no values");
      auto table = fedrec::run_grid(cfg, key, values);
      fedrec::write_results(out_path, table, format);
      for (const auto& row : table.rows) print_row(row);
    } else if (gen->parsed()) {
      const auto raw = fedrec::synthesize_interactions(spec);
      fedrec::write_interactions(gen_out, raw, fedrec::InteractionFormat::movielens_tab);
      std::printf("wrote %zu interactions to %s\n", raw.size(), gen_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
