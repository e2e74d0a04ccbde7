#include "pfgsynth/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "pfgsynth/error.hpp"
#include "pfgsynth/model_io.hpp"

namespace pfgsynth {

bool ColumnSkeleton::adjacent(std::size_t a, std::size_t b) const {
  if (a > b) std::swap(a, b);
  return std::find(edges.begin(), edges.end(), std::pair{a, b}) != edges.end();
}

std::vector<std::string> learnable_columns(const AugmentedJoin& join) {
  std::vector<std::string> out;
  for (const auto& c : join.columns()) {
    if (c.kind != ColumnKind::EntityKey) out.push_back(c.name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Every combination of one cluster per listed class, first class slowest.
std::vector<std::vector<std::size_t>> combinations(const std::vector<std::size_t>& sizes) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> current(sizes.size(), 0);
  while (true) {
    out.push_back(current);
    std::size_t i = sizes.size();
    while (i > 0) {
      --i;
      if (++current[i] < sizes[i]) break;
      current[i] = 0;
      if (i == 0) return out;
    }
    if (sizes.empty()) return out;
  }
}

std::string tagged(std::string base, const std::vector<std::string>& tags) {
  for (const auto& t : tags) base += "." + t;
  return base;
}

struct ColumnInfo {
  std::string name;
  std::vector<std::size_t> entities;
  Range range;
  bool attribute;
};

std::vector<ColumnInfo> schema_columns(const ErSchema& schema) {
  std::vector<ColumnInfo> out;
  for (std::size_t e = 0; e < schema.entities().size(); ++e) {
    for (const auto& a : schema.entities()[e].attributes) out.push_back({a.name, {e}, a.range, true});
  }
  for (std::size_t r = 0; r < schema.relationships().size(); ++r) {
    const auto& rel = schema.relationships()[r];
    out.push_back({rel.name, schema.participant_entities(r), kBooleanRange, false});
    for (const auto& a : rel.attributes) out.push_back({a.name, schema.participant_entities(r), a.range, true});
  }
  return out;
}

std::vector<std::string> labels_for(const ErSchema& schema, const ClusterAssignment& clusters,
                                    const std::vector<std::size_t>& entities, const std::vector<std::size_t>& combo) {
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    tags.push_back(clusters.of(schema.entities()[entities[i]].name).labels[combo[i]]);
  }
  return tags;
}

std::vector<std::size_t> cluster_counts(const ErSchema& schema, const ClusterAssignment& clusters,
                                        const std::vector<std::size_t>& entities) {
  std::vector<std::size_t> sizes;
  for (auto e : entities) sizes.push_back(clusters.of(schema.entities()[e].name).size());
  return sizes;
}

CiOutcome g_test(const AugmentedJoin& join, std::size_t x, std::size_t y, const std::vector<std::size_t>& z,
                 double alpha) {
  const auto rx = join.columns()[x].range.size();
  const auto ry = join.columns()[y].range.size();
  std::size_t strata = 1;
  for (auto c : z) strata *= join.columns()[c].range.size();

  std::vector<double> counts(strata * rx * ry, 0.0);
  std::size_t used = 0;
  for (std::size_t r = 0; r < join.row_count(); ++r) {
    const auto vx = join.value(x, r);
    const auto vy = join.value(y, r);
    if (vx == kAbsent || vy == kAbsent) continue;
    std::size_t s = 0;
    bool absent = false;
    for (auto c : z) {
      const auto v = join.value(c, r);
      if (v == kAbsent) {
        absent = true;
        break;
      }
      s = s * join.columns()[c].range.size() + static_cast<std::size_t>(v);
    }
    if (absent) continue;
    counts[(s * rx + static_cast<std::size_t>(vx)) * ry + static_cast<std::size_t>(vy)] += 1.0;
    ++used;
  }
  if (used == 0) {
    throw CiTestError("no usable rows to test " + join.columns()[x].name + " against " + join.columns()[y].name);
  }

  CiOutcome out;
  for (std::size_t s = 0; s < strata; ++s) {
    const double* cell = &counts[s * rx * ry];
    std::vector<double> nx(rx, 0.0), ny(ry, 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < rx; ++i) {
      for (std::size_t j = 0; j < ry; ++j) {
        nx[i] += cell[i * ry + j];
        ny[j] += cell[i * ry + j];
        n += cell[i * ry + j];
      }
    }
    if (n == 0.0) continue;
    for (std::size_t i = 0; i < rx; ++i) {
      for (std::size_t j = 0; j < ry; ++j) {
        const double o = cell[i * ry + j];
        if (o > 0.0) out.statistic += 2.0 * o * std::log(o * n / (nx[i] * ny[j]));
      }
    }
    out.dof += static_cast<double>((rx - 1) * (ry - 1));
  }
  out.statistic = std::max(out.statistic, 0.0);
  boost::math::chi_squared dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  out.independent = out.p_value > alpha;
  return out;
}

bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
  const auto k = idx.size();
  std::size_t i = k;
  while (i > 0) {
    --i;
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

void bron_kerbosch(std::vector<std::size_t> r, std::vector<std::size_t> p, std::vector<std::size_t> x,
                   const std::vector<std::vector<char>>& adj, std::vector<std::vector<std::size_t>>& out) {
  if (p.empty() && x.empty()) {
    std::sort(r.begin(), r.end());
    out.push_back(r);
    return;
  }
  std::size_t pivot = p.empty() ? x.front() : p.front();
  std::size_t best = 0;
  for (const auto* set : {&p, &x}) {
    for (auto u : *set) {
      std::size_t deg = 0;
      for (auto v : p) deg += adj[u][v];
      if (deg > best) {
        best = deg;
        pivot = u;
      }
    }
  }
  const auto candidates = p;
  for (auto v : candidates) {
    if (adj[pivot][v]) continue;
    std::vector<std::size_t> r2 = r, p2, x2;
    r2.push_back(v);
    for (auto u : p) {
      if (adj[v][u]) p2.push_back(u);
    }
    for (auto u : x) {
      if (adj[v][u]) x2.push_back(u);
    }
    bron_kerbosch(std::move(r2), std::move(p2), std::move(x2), adj, out);
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

} // namespace

std::vector<RandomVariable> build_random_variables(const ErSchema& schema, const ClusterAssignment& clusters) {
  std::vector<RandomVariable> out;
  for (const auto& col : schema_columns(schema)) {
    for (const auto& combo : combinations(cluster_counts(schema, clusters, col.entities))) {
      out.push_back({tagged(col.name, labels_for(schema, clusters, col.entities, combo)), col.range});
    }
  }
  return out;
}

CiOutcome ci_test(const AugmentedJoin& join, const std::string& x, const std::string& y,
                  const std::vector<std::string>& z, double alpha) {
  const auto cx = join.column_index(x);
  const auto cy = join.column_index(y);
  if (cx == cy) throw CiTestError("ci_test needs two distinct columns");
  std::vector<std::size_t> cz;
  for (const auto& name : z) {
    const auto c = join.column_index(name);
    if (c == cx || c == cy) throw CiTestError("conditioning set contains a tested column");
    cz.push_back(c);
  }
  return g_test(join, cx, cy, cz, alpha);
}

ColumnSkeleton learn_skeleton(const AugmentedJoin& join, const std::vector<std::string>& columns, double alpha,
                              std::size_t max_condition_size) {
  ColumnSkeleton sk;
  sk.nodes = columns;
  std::sort(sk.nodes.begin(), sk.nodes.end());
  sk.nodes.erase(std::unique(sk.nodes.begin(), sk.nodes.end()), sk.nodes.end());
  const auto n = sk.nodes.size();
  std::vector<std::size_t> col;
  for (const auto& name : sk.nodes) col.push_back(join.column_index(name));

  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 1));
  for (std::size_t i = 0; i < n; ++i) adj[i][i] = 0;

  for (std::size_t level = 0; level <= max_condition_size; ++level) {
    std::vector<std::vector<std::size_t>> snapshot(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (adj[i][j]) snapshot[i].push_back(j);
      }
    }
    bool testable = false;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!adj[a][b]) continue;
        bool removed = false;
        for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
          std::vector<std::size_t> cand;
          for (auto v : snapshot[from]) {
            if (v != to) cand.push_back(v);
          }
          if (cand.size() < level) continue;
          testable = true;
          std::vector<std::size_t> idx(level);
          for (std::size_t i = 0; i < level; ++i) idx[i] = i;
          do {
            std::vector<std::size_t> z;
            for (auto i : idx) z.push_back(col[cand[i]]);
            if (g_test(join, col[a], col[b], z, alpha).independent) {
              removed = true;
              break;
            }
          } while (level > 0 && next_combination(idx, cand.size()));
          if (removed) break;
        }
        if (removed) adj[a][b] = adj[b][a] = 0;
      }
    }
    if (!testable) break;
  }

  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (adj[a][b]) sk.edges.emplace_back(a, b);
    }
  }
  sk.cliques = maximal_cliques(n, sk.edges);
  return sk;
}

std::vector<std::vector<std::size_t>> maximal_cliques(std::size_t n,
                                                      const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (auto [a, b] : edges) adj[a][b] = adj[b][a] = 1;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::vector<std::vector<std::size_t>> out;
  if (n > 0) bron_kerbosch({}, all, {}, adj, out);
  std::sort(out.begin(), out.end());
  return out;
}

ColumnSkeleton skeleton_from_edges(std::vector<std::string> nodes,
                                   const std::vector<std::pair<std::string, std::string>>& edges) {
  ColumnSkeleton sk;
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) throw ParamError("skeleton repeats a node");
  sk.nodes = std::move(nodes);
  auto index = [&](const std::string& name) {
    auto it = std::lower_bound(sk.nodes.begin(), sk.nodes.end(), name);
    if (it == sk.nodes.end() || *it != name) throw ParamError("skeleton edge names unknown column '" + name + "'");
    return static_cast<std::size_t>(it - sk.nodes.begin());
  };
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [a, b] : edges) {
    auto i = index(a), j = index(b);
    if (i == j) throw ParamError("skeleton edge " + a + " - " + b + " is a self loop");
    if (i > j) std::swap(i, j);
    if (!seen.emplace(i, j).second) throw ParamError("skeleton edge " + a + " - " + b + " listed twice");
  }
  sk.edges.assign(seen.begin(), seen.end());
  sk.cliques = maximal_cliques(sk.nodes.size(), sk.edges);
  return sk;
}

std::string write_skeleton(const ColumnSkeleton& skeleton) {
  std::ostringstream out;
  for (const auto& n : skeleton.nodes) out << "node " << quote_token(n) << '\n';
  for (auto [a, b] : skeleton.edges) out << "edge " << quote_token(skeleton.nodes[a]) << ' ' << quote_token(skeleton.nodes[b]) << '\n';
  for (const auto& c : skeleton.cliques) {
    out << "clique";
    for (auto i : c) out << ' ' << quote_token(skeleton.nodes[i]);
    out << '\n';
  }
  return out.str();
}

ColumnSkeleton parse_skeleton(const std::string& text, std::vector<std::string> nodes) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto tokens = tokenize(line, number);
    if (tokens.empty()) continue;
    if (tokens[0] == "edge") {
      if (tokens.size() != 3) throw ParseError(number, "edge needs two column names");
      edges.emplace_back(tokens[1], tokens[2]);
    } else if (tokens[0] == "node") {
      if (tokens.size() != 2) throw ParseError(number, "node needs one column name");
      if (std::find(nodes.begin(), nodes.end(), tokens[1]) == nodes.end()) {
        throw ParseError(number, "unknown column '" + tokens[1] + "'");
      }
    } else if (tokens[0] != "clique") {
      throw ParseError(number, "unknown record '" + tokens[0] + "'");
    }
  }
  return skeleton_from_edges(std::move(nodes), edges);
}

std::vector<FactorSignature> instantiate_factors(const ErSchema& schema, const ColumnSkeleton& skeleton,
                                                 const ClusterAssignment& clusters) {
  const auto columns = schema_columns(schema);
  auto info = [&](const std::string& name) -> const ColumnInfo& {
    for (const auto& c : columns) {
      if (c.name == name) return c;
    }
    throw ParamError("skeleton column '" + name + "' is not an attribute or relationship of the schema");
  };
  for (const auto& n : skeleton.nodes) info(n);

  std::vector<FactorSignature> out;
  std::set<std::string> names;
  auto add = [&](std::vector<std::string> cols, const std::vector<std::size_t>& entities,
                 const std::vector<std::size_t>& combo) {
    FactorSignature sig;
    std::string base = "phi";
    for (const auto& c : cols) base += "_" + c;
    sig.name = tagged(base, labels_for(schema, clusters, entities, combo));
    for (std::size_t i = 2; !names.insert(sig.name).second; ++i) {
      sig.name = tagged(base, labels_for(schema, clusters, entities, combo)) + "~" + std::to_string(i);
    }
    for (std::size_t i = 0; i < entities.size(); ++i) {
      const auto& entity = schema.entities()[entities[i]].name;
      sig.cluster_filter[entity] = clusters.of(entity).labels[combo[i]];
    }
    for (const auto& c : cols) {
      const auto& ci = info(c);
      std::vector<std::string> tags;
      for (auto e : ci.entities) tags.push_back(sig.cluster_filter.at(schema.entities()[e].name));
      sig.args.push_back(tagged(c, tags));
    }
    sig.columns = std::move(cols);
    out.push_back(std::move(sig));
  };

  std::vector<char> covered(skeleton.nodes.size(), 0);
  for (const auto& clique : skeleton.cliques) {
    if (clique.size() < 2) continue;
    std::vector<std::string> cols;
    std::set<std::size_t> ents;
    for (auto i : clique) {
      covered[i] = 1;
      cols.push_back(skeleton.nodes[i]);
      for (auto e : info(skeleton.nodes[i]).entities) ents.insert(e);
    }
    const std::vector<std::size_t> entities(ents.begin(), ents.end());
    for (const auto& combo : combinations(cluster_counts(schema, clusters, entities))) add(cols, entities, combo);
  }
  for (const auto& col : columns) {
    auto pos = std::lower_bound(skeleton.nodes.begin(), skeleton.nodes.end(), col.name);
    const bool in_skeleton = pos != skeleton.nodes.end() && *pos == col.name;
    const bool isolated = !in_skeleton || !covered[static_cast<std::size_t>(pos - skeleton.nodes.begin())];
    if (!col.attribute && !isolated) continue;
    for (const auto& combo : combinations(cluster_counts(schema, clusters, col.entities))) add({col.name}, col.entities, combo);
  }
  return out;
}

FactorGraph learn_potentials(const AugmentedJoin& join, const ErSchema& schema, const RelationalInstance& inst,
                             const ClusterAssignment& clusters, const std::vector<FactorSignature>& signatures,
                             std::optional<double> smoothing) {
  if (smoothing && !(*smoothing >= 0.0 && std::isfinite(*smoothing))) throw ParamError("smoothing must be a finite value >= 0");

  // Cluster index of every entity row, per class.
  std::vector<std::vector<std::size_t>> cluster_of(schema.entities().size());
  for (std::size_t e = 0; e < schema.entities().size(); ++e) {
    const auto& ec = clusters.of(schema.entities()[e].name);
    const auto& table = inst.entities[e];
    cluster_of[e].assign(table.size(), SIZE_MAX);
    for (std::size_t c = 0; c < ec.size(); ++c) {
      for (const auto& key : ec.members[c]) {
        auto row = table.row_of(key);
        if (!row) throw QueryError("cluster " + ec.labels[c] + " lists unknown key '" + key + "'");
        cluster_of[e][*row] = c;
      }
    }
  }

  std::vector<FactorSpec> specs;
  for (const auto& sig : signatures) {
    std::vector<std::pair<std::size_t, std::size_t>> filter;
    for (const auto& [entity, label] : sig.cluster_filter) {
      const auto e = schema.find_entity(entity);
      if (!e) throw QueryError("unknown entity class '" + entity + "'");
      const auto c = clusters.of(entity).find_label(label);
      if (!c) throw QueryError("unknown cluster '" + label + "' of " + entity);
      filter.emplace_back(*e, *c);
    }
    std::vector<std::size_t> cols, cards;
    for (const auto& name : sig.columns) {
      cols.push_back(join.column_index(name));
      cards.push_back(join.columns()[cols.back()].range.size());
    }
    PotentialTable table(table_size(cards), 0.0);
    for (std::size_t r = 0; r < join.row_count(); ++r) {
      bool keep = true;
      for (auto [e, c] : filter) {
        if (cluster_of[e][join.entity_row(e, r)] != c) {
          keep = false;
          break;
        }
      }
      if (!keep) continue;
      std::size_t index = 0;
      for (std::size_t i = 0; i < cols.size() && keep; ++i) {
        const auto v = join.value(cols[i], r);
        if (v == kAbsent) keep = false;
        index = index * cards[i] + static_cast<std::size_t>(v);
      }
      if (keep) table[index] += 1.0;
    }
    if (smoothing) {
      for (auto& v : table) v += *smoothing;
    }
    if (std::all_of(table.begin(), table.end(), [](double v) { return v == 0.0; })) {
      throw DegenerateFactor("factor " + sig.name + " counts no rows (all potentials zero); try --smooth");
    }
    specs.push_back({sig.name, sig.args, std::move(table)});
  }
  return FactorGraph(build_random_variables(schema, clusters), std::move(specs));
}

} // namespace pfgsynth
