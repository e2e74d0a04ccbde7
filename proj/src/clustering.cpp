#include "pfgsynth/clustering.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "pfgsynth/csv.hpp"
#include "pfgsynth/error.hpp"
#include "pfgsynth/rng.hpp"

namespace pfgsynth {

std::optional<std::size_t> EntityClusters::find_label(std::string_view label) const {
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (labels[c] == label) return c;
  }
  return std::nullopt;
}

std::optional<std::size_t> EntityClusters::cluster_of(std::string_view key) const {
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (std::binary_search(members[c].begin(), members[c].end(), key)) return c;
  }
  return std::nullopt;
}

ClusterAssignment::ClusterAssignment(const ErSchema& schema, std::vector<EntityClusters> classes) {
  std::set<std::string> labels;
  for (const auto& e : schema.entities()) {
    auto it = std::find_if(classes.begin(), classes.end(), [&](const auto& c) { return c.entity == e.name; });
    if (it == classes.end()) throw ParamError("no clusters given for entity class " + e.name);
    auto ec = std::move(*it);
    if (ec.labels.size() != ec.members.size()) throw ParamError("cluster labels and members disagree for " + e.name);
    if (ec.labels.empty()) throw ParamError("entity class " + e.name + " has no clusters");
    std::set<std::string> keys;
    for (std::size_t c = 0; c < ec.size(); ++c) {
      const auto& label = ec.labels[c];
      if (label.empty() || std::any_of(label.begin(), label.end(), [](unsigned char ch) {
            return std::isspace(ch) || ch == '.' || ch == ',' || ch == '{' || ch == '}';
          })) {
        throw ParamError("invalid cluster label '" + label + "'");
      }
      if (!labels.insert(label).second) throw ParamError("cluster label '" + label + "' used twice");
      if (ec.members[c].empty()) throw ParamError("cluster " + label + " is empty");
      std::sort(ec.members[c].begin(), ec.members[c].end());
      for (const auto& k : ec.members[c]) {
        if (!keys.insert(k).second) throw ParamError(e.name + " key '" + k + "' is in more than one cluster");
      }
    }
    classes_.push_back(std::move(ec));
  }
  if (classes.size() != schema.entities().size()) throw ParamError("clusters given for an unknown entity class");
}

const EntityClusters& ClusterAssignment::of(std::string_view entity) const {
  for (const auto& c : classes_) {
    if (c.entity == entity) return c;
  }
  throw ParamError("no clusters for entity class '" + std::string(entity) + "'");
}

std::vector<std::vector<std::uint32_t>> entity_features(const ErSchema& schema, const RelationalInstance& inst,
                                                        std::size_t entity) {
  const auto& table = inst.entities[entity];
  std::vector<std::vector<std::uint32_t>> features(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (const auto& col : table.attributes) features[r].push_back(col[r]);
  }
  for (std::size_t ri = 0; ri < schema.relationships().size(); ++ri) {
    const auto ents = schema.participant_entities(ri);
    for (std::size_t p = 0; p < ents.size(); ++p) {
      if (ents[p] != entity) continue;
      std::vector<std::uint32_t> degree(table.size(), 0);
      for (auto row : inst.relationships[ri].participants[p]) ++degree[row];
      for (std::size_t r = 0; r < table.size(); ++r) features[r].push_back(std::min<std::uint32_t>(degree[r], 2));
    }
  }
  return features;
}

namespace {

using Features = std::vector<std::vector<std::uint32_t>>;

std::size_t hamming(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

std::vector<std::uint32_t> mode_of(const Features& features, const std::vector<std::size_t>& group) {
  const auto width = features.front().size();
  std::vector<std::uint32_t> mode(width, 0);
  for (std::size_t f = 0; f < width; ++f) {
    std::map<std::uint32_t, std::size_t> freq;
    for (auto i : group) ++freq[features[i][f]];
    std::size_t best = 0;
    for (const auto& [v, n] : freq) {
      if (n > best) {
        best = n;
        mode[f] = v;
      }
    }
  }
  return mode;
}

struct KModesResult {
  std::vector<std::size_t> assignment;
  std::size_t cost = std::numeric_limits<std::size_t>::max();
};

KModesResult kmodes_once(const Features& features, std::size_t k, Rng& rng) {
  const auto n = features.size();
  std::vector<std::vector<std::uint32_t>> modes;
  std::vector<std::size_t> nearest(n, std::numeric_limits<std::size_t>::max());
  std::size_t first = rng.below(n);
  modes.push_back(features[first]);
  while (modes.size() < k) {
    std::size_t far = 0;
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], hamming(features[i], modes.back()));
      if (nearest[i] > far) {
        far = nearest[i];
        ties.clear();
      }
      if (nearest[i] == far) ties.push_back(i);
    }
    modes.push_back(features[ties[rng.below(ties.size())]]);
  }

  std::vector<std::size_t> assignment(n, k);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0, best_d = std::numeric_limits<std::size_t>::max();
      for (std::size_t c = 0; c < k; ++c) {
        const auto d = hamming(features[i], modes[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    std::vector<std::vector<std::size_t>> groups(k);
    for (std::size_t i = 0; i < n; ++i) groups[assignment[i]].push_back(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (!groups[c].empty()) continue;
      // Steal the worst-fitting entity of a cluster that can spare one.
      std::size_t pick = n, pick_d = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (groups[assignment[i]].size() < 2) continue;
        const auto d = hamming(features[i], modes[assignment[i]]);
        if (pick == n || d > pick_d) {
          pick = i;
          pick_d = d;
        }
      }
      auto& from = groups[assignment[pick]];
      from.erase(std::find(from.begin(), from.end(), pick));
      assignment[pick] = c;
      groups[c].push_back(pick);
      changed = true;
    }
    for (std::size_t c = 0; c < k; ++c) modes[c] = mode_of(features, groups[c]);
    if (!changed) break;
  }

  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t i = 0; i < n; ++i) groups[assignment[i]].push_back(i);
  return {assignment, kmodes_cost(features, groups)};
}

std::vector<std::string> label_prefixes(const ErSchema& schema) {
  std::vector<std::string> lower;
  for (const auto& e : schema.entities()) {
    std::string s;
    for (unsigned char ch : e.name) s.push_back(static_cast<char>(std::tolower(ch)));
    lower.push_back(s);
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    std::string prefix = lower[i];
    for (std::size_t len = 1; len <= lower[i].size(); ++len) {
      const auto candidate = lower[i].substr(0, len);
      bool unique = true;
      for (std::size_t j = 0; j < lower.size(); ++j) {
        if (j != i && lower[j].substr(0, len) == candidate) unique = false;
      }
      if (unique) {
        prefix = candidate;
        break;
      }
    }
    if (std::isdigit(static_cast<unsigned char>(prefix.back()))) prefix += '_';
    out.push_back(prefix);
  }
  return out;
}

} // namespace

std::size_t kmodes_cost(const std::vector<std::vector<std::uint32_t>>& features,
                        const std::vector<std::vector<std::size_t>>& groups) {
  std::size_t cost = 0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    const auto mode = mode_of(features, g);
    for (auto i : g) cost += hamming(features[i], mode);
  }
  return cost;
}

ClusterAssignment cluster_entities(const ErSchema& schema, const RelationalInstance& inst,
                                   const std::map<std::string, std::size_t>& k, std::uint64_t seed,
                                   std::size_t default_k) {
  for (const auto& [name, _] : k) {
    if (!schema.find_entity(name)) throw ParamError("--k names unknown entity class '" + name + "'");
  }
  const auto prefixes = label_prefixes(schema);
  std::vector<EntityClusters> classes;
  for (std::size_t e = 0; e < schema.entities().size(); ++e) {
    const auto& name = schema.entities()[e].name;
    const auto& table = inst.entities[e];
    const auto it = k.find(name);
    const auto kk = it == k.end() ? default_k : it->second;
    if (kk == 0) throw ParamError("k for " + name + " must be at least 1");
    if (kk > table.size()) {
      throw ParamError("k=" + std::to_string(kk) + " for " + name + " exceeds its " + std::to_string(table.size()) +
                       " entities");
    }

    // Work on entities in key order so input row order cannot matter.
    std::vector<std::size_t> order(table.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return table.keys[a] < table.keys[b]; });
    const auto raw = entity_features(schema, inst, e);
    Features features;
    for (auto r : order) features.push_back(raw[r]);

    std::vector<std::size_t> assignment(order.size());
    if (kk == table.size()) {
      std::iota(assignment.begin(), assignment.end(), std::size_t{0});
    } else if (features.front().empty() || kk == 1) {
      std::fill(assignment.begin(), assignment.end(), std::size_t{0});
      for (std::size_t c = 1; c < kk; ++c) assignment[c] = c;
    } else {
      KModesResult best;
      for (std::size_t restart = 0; restart < kClusterRestarts; ++restart) {
        Rng rng(splitmix64(seed ^ splitmix64(e * kClusterRestarts + restart)));
        auto result = kmodes_once(features, kk, rng);
        if (result.cost < best.cost) best = std::move(result);
      }
      assignment = best.assignment;
    }

    std::vector<std::vector<std::string>> members(kk);
    for (std::size_t i = 0; i < order.size(); ++i) members[assignment[i]].push_back(table.keys[order[i]]);
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    EntityClusters ec{name, {}, std::move(members)};
    for (std::size_t c = 0; c < kk; ++c) ec.labels.push_back(prefixes[e] + std::to_string(c + 1));
    classes.push_back(std::move(ec));
  }
  return ClusterAssignment(schema, std::move(classes));
}

ClusterAssignment load_clusters(const std::filesystem::path& path, const ErSchema& schema,
                                const RelationalInstance* inst) {
  const auto file = path.string();
  const auto t = csv::read(path);
  const std::vector<std::string> expected{"entity_class", "key", "cluster"};
  if (t.header != expected) throw LoadError(file + ":1: header must be entity_class,key,cluster");

  std::vector<EntityClusters> classes;
  for (const auto& e : schema.entities()) classes.push_back({e.name, {}, {}});
  std::vector<std::set<std::string>> seen(classes.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = file + ":" + std::to_string(t.lines[r]) + ": ";
    const auto& row = t.rows[r];
    auto e = schema.find_entity(row[0]);
    if (!e) throw LoadError(where + "unknown entity class '" + row[0] + "'");
    if (row[1].empty()) throw LoadError(where + "empty key");
    if (row[2].empty()) throw LoadError(where + "empty cluster label");
    if (!seen[*e].insert(row[1]).second) throw LoadError(where + row[0] + " key '" + row[1] + "' listed twice");
    if (inst && !inst->entities[*e].row_of(row[1])) throw LoadError(where + "unknown " + row[0] + " key '" + row[1] + "'");
    auto& ec = classes[*e];
    auto c = ec.find_label(row[2]);
    if (!c) {
      ec.labels.push_back(row[2]);
      ec.members.emplace_back();
      c = ec.labels.size() - 1;
    }
    ec.members[*c].push_back(row[1]);
  }
  if (inst) {
    for (std::size_t e = 0; e < classes.size(); ++e) {
      for (const auto& key : inst->entities[e].keys) {
        if (!seen[e].count(key)) throw LoadError(file + ": " + classes[e].entity + " key '" + key + "' is not assigned to a cluster");
      }
    }
  }
  for (const auto& ec : classes) {
    if (ec.labels.empty()) throw LoadError(file + ": no clusters for entity class " + ec.entity);
  }
  try {
    return ClusterAssignment(schema, std::move(classes));
  } catch (const ParamError& err) {
    throw LoadError(file + ": " + err.what());
  }
}

void write_clusters(const std::filesystem::path& path, const ClusterAssignment& clusters) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(path.string() + ": cannot write file");
  csv::write_row(out, {"entity_class", "key", "cluster"});
  for (const auto& ec : clusters.classes()) {
    for (std::size_t c = 0; c < ec.size(); ++c) {
      for (const auto& key : ec.members[c]) csv::write_row(out, {ec.entity, key, ec.labels[c]});
    }
  }
}

std::size_t count_rows(const AugmentedJoin& join, const ErSchema& schema, const RelationalInstance& inst,
                       const ClusterAssignment& clusters, const std::map<std::string, std::string>& cluster_filter,
                       const std::map<std::string, std::string>& column_values) {
  EntityFilter filter;
  for (const auto& [entity, label] : cluster_filter) {
    if (!schema.find_entity(entity)) throw QueryError("unknown entity class '" + entity + "'");
    const auto& ec = clusters.of(entity);
    auto c = ec.find_label(label);
    if (!c) throw QueryError("unknown cluster '" + label + "' of " + entity);
    filter[entity] = ec.members[*c];
  }
  return count_rows(join, schema, inst, filter, column_values);
}

} // namespace pfgsynth
