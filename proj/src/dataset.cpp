#include "fedrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "fedrec/rng.hpp"

namespace fedrec {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line_no,
                            const std::string& why) {
  throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed line: " + why);
}

double parse_weight(const std::filesystem::path& path, std::size_t line_no,
                    const std::string& field) {
  try {
    std::size_t pos = 0;
    const double w = std::stod(field, &pos);
    if (pos != field.size()) malformed(path, line_no, "bad weight '" + field + "'");
    return w;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    malformed(path, line_no, "bad weight '" + field + "'");
  }
}

}  // namespace

InteractionFormat interaction_format_from_string(const std::string& s) {
  if (s == "movielens_tab") return InteractionFormat::movielens_tab;
  if (s == "csv") return InteractionFormat::csv;
  throw DataError("unknown interaction format '" + s + "'");
}

std::size_t Dataset::n_interactions() const {
  std::size_t n = 0;
  for (const auto& p : positives) n += p.size();
  return n;
}

bool Dataset::has_interaction(int user, int item) const {
  if (user < 0 || user >= n_users) return false;
  const auto& p = positives[static_cast<std::size_t>(user)];
  return std::binary_search(p.begin(), p.end(), item);
}

std::vector<long> Dataset::item_counts() const {
  std::vector<long> counts(static_cast<std::size_t>(n_items), 0);
  for (const auto& p : positives) {
    for (int item : p) ++counts[static_cast<std::size_t>(item)];
  }
  return counts;
}

std::size_t PublicView::total() const {
  std::size_t n = 0;
  for (const auto& p : positives) n += p.size();
  return n;
}

bool PublicView::has(int user, int item) const {
  if (user < 0 || user >= static_cast<int>(positives.size())) return false;
  const auto& p = positives[static_cast<std::size_t>(user)];
  return std::binary_search(p.begin(), p.end(), item);
}

long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

std::vector<RawInteraction> load_interactions(const std::filesystem::path& path,
                                              InteractionFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file '" + path.string() + "'");

  std::vector<RawInteraction> raw;
  std::string line;
  std::size_t line_no = 0;
  bool saw_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;

    if (format == InteractionFormat::movielens_tab) {
      auto f = split_on(line, '\t');
      if (f.size() != 4) {
        malformed(path, line_no, "expected user<TAB>item<TAB>rating<TAB>timestamp");
      }
      RawInteraction r;
      r.user = trim(f[0]);
      r.item = trim(f[1]);
      if (r.user.empty() || r.item.empty()) malformed(path, line_no, "empty user or item token");
      r.weight = parse_weight(path, line_no, trim(f[2]));
      raw.push_back(std::move(r));
    } else {
      auto f = split_on(line, ',');
      if (!saw_content && f.size() >= 2 && trim(f[0]) == "user" && trim(f[1]) == "item") {
        saw_content = true;  // header row
        continue;
      }
      saw_content = true;
      if (f.size() < 2 || f.size() > 4) {
        malformed(path, line_no, "expected 2 to 4 comma-separated fields, got " +
                                     std::to_string(f.size()));
      }
      RawInteraction r;
      r.user = trim(f[0]);
      r.item = trim(f[1]);
      if (r.user.empty() || r.item.empty()) malformed(path, line_no, "empty user or item token");
      if (f.size() >= 3 && !trim(f[2]).empty()) {
        r.weight = parse_weight(path, line_no, trim(f[2]));
      }
      raw.push_back(std::move(r));
    }
  }
  return raw;
}

void write_interactions(const std::filesystem::path& path,
                        const std::vector<RawInteraction>& raw, InteractionFormat format) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  char buf[64];
  for (const auto& r : raw) {
    const double w = r.weight.value_or(1.0);
    std::snprintf(buf, sizeof(buf), "%.10g", w);
    if (format == InteractionFormat::movielens_tab) {
      out << r.user << '\t' << r.item << '\t' << buf << '\t' << 0 << '\n';
    } else {
      out << r.user << ',' << r.item;
      if (r.weight) out << ',' << buf;
      out << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Dataset build_dataset(const std::vector<RawInteraction>& raw) {
  if (raw.empty()) throw DataError("empty interaction list");

  Dataset ds;
  std::unordered_map<std::string, int> user_ids;
  std::unordered_map<std::string, int> item_ids;
  user_ids.reserve(raw.size());
  item_ids.reserve(raw.size());

  for (const auto& r : raw) {
    auto [uit, unew] = user_ids.try_emplace(r.user, ds.n_users);
    if (unew) {
      ++ds.n_users;
      ds.user_tokens.push_back(r.user);
      ds.positives.emplace_back();
    }
    auto [iit, inew] = item_ids.try_emplace(r.item, ds.n_items);
    if (inew) {
      ++ds.n_items;
      ds.item_tokens.push_back(r.item);
    }
    ds.positives[static_cast<std::size_t>(uit->second)].push_back(iit->second);
  }
  for (auto& p : ds.positives) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
  return ds;
}

Split leave_one_out(const Dataset& dataset, std::uint64_t seed) {
  Split split;
  split.train = dataset;
  for (int u = 0; u < dataset.n_users; ++u) {
    auto& pos = split.train.positives[static_cast<std::size_t>(u)];
    if (pos.size() < 2) continue;
    Rng rng(derive_seed(seed, seed_tag::holdout, static_cast<std::uint64_t>(u)));
    const int pick = rng.index(static_cast<int>(pos.size()));
    split.test[u] = pos[static_cast<std::size_t>(pick)];
    pos.erase(pos.begin() + pick);
  }
  return split;
}

PublicView sample_public(const Dataset& train, double xi, std::uint64_t seed) {
  if (xi < 0.0 || xi > 1.0) throw DataError("public fraction must lie in [0, 1]");
  PublicView view;
  view.xi = xi;
  view.positives.resize(static_cast<std::size_t>(train.n_users));
  for (int u = 0; u < train.n_users; ++u) {
    const auto& pos = train.positives[static_cast<std::size_t>(u)];
    const int n = static_cast<int>(pos.size());
    long take = round_half_up(xi * n);
    if (take < 0) take = 0;
    if (take > n) take = n;
    if (take == 0) continue;
    Rng rng(derive_seed(seed, seed_tag::public_view, static_cast<std::uint64_t>(u)));
    // A full permutation is drawn so that a larger xi extends the same prefix
    // rather than reshuffling it.
    auto perm = rng.sample_indices(n, n);
    auto& out = view.positives[static_cast<std::size_t>(u)];
    out.reserve(static_cast<std::size_t>(take));
    for (long j = 0; j < take; ++j) out.push_back(pos[static_cast<std::size_t>(perm[j])]);
    std::sort(out.begin(), out.end());
  }
  return view;
}

void save_split_sidecar(const std::filesystem::path& path, const SplitSidecar& sidecar) {
  nlohmann::ordered_json j;
  j["seed"] = sidecar.seed;
  nlohmann::ordered_json test = nlohmann::ordered_json::object();
  for (const auto& [u, item] : sidecar.test) test[std::to_string(u)] = item;
  j["test"] = std::move(test);
  j["user_map"] = sidecar.user_tokens;
  j["item_map"] = sidecar.item_tokens;

  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

SplitSidecar load_split_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sidecar '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("bad sidecar '" + path.string() + "': " + e.what());
  }
  SplitSidecar s;
  s.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& [key, value] : j.at("test").items()) {
    s.test[std::stoi(key)] = value.get<int>();
  }
  s.user_tokens = j.at("user_map").get<std::vector<std::string>>();
  s.item_tokens = j.at("item_map").get<std::vector<std::string>>();
  return s;
}

}  // namespace fedrec
