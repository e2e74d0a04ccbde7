#include "pfgsynth/acp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "pfgsynth/csv.hpp"
#include "pfgsynth/error.hpp"

namespace pfgsynth {

namespace {

std::size_t distinct_count(const std::vector<std::size_t>& colours) {
  return std::set<std::size_t>(colours.begin(), colours.end()).size();
}

std::vector<Range> argument_ranges(const FactorGraph& fg, const Factor& f) {
  std::vector<Range> out;
  for (auto a : f.args) out.push_back(fg.variables()[a].range);
  return out;
}

std::vector<std::size_t> cardinalities_of(const std::vector<Range>& ranges) {
  std::vector<std::size_t> out;
  for (const auto& r : ranges) out.push_back(r.size());
  return out;
}

// Dense ids in sorted signature order.
template <class Sig>
std::vector<std::size_t> densify(const std::vector<Sig>& signatures) {
  std::vector<Sig> sorted = signatures;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::size_t> out;
  for (const auto& s : signatures) {
    out.push_back(static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin()));
  }
  return out;
}

} // namespace

std::size_t Colouring::rv_colour_count() const { return distinct_count(rv); }
std::size_t Colouring::factor_colour_count() const { return distinct_count(factor); }

std::vector<std::size_t> initial_rv_colours(const FactorGraph& fg, const Evidence& evidence) {
  for (const auto& [name, value] : evidence) {
    auto v = fg.find_variable(name);
    if (!v) throw MalformedModel("evidence on unknown variable '" + name + "'");
    if (!fg.variables()[*v].value_index(value)) {
      throw MalformedModel("evidence value '" + value + "' is not in the range of " + name);
    }
  }
  using Sig = std::pair<Range, std::pair<bool, std::string>>;
  std::vector<Sig> sigs;
  for (const auto& v : fg.variables()) {
    auto it = evidence.find(v.name);
    sigs.push_back({v.range, it == evidence.end() ? std::pair{false, std::string{}} : std::pair{true, it->second}});
  }
  return densify(sigs);
}

CanonicalFactor canonicalize_factor(const std::vector<Range>& ranges, const PotentialTable& table,
                                    std::size_t arity_cap) {
  const auto n = ranges.size();
  CanonicalFactor best;
  best.permutation.resize(n);
  std::iota(best.permutation.begin(), best.permutation.end(), std::size_t{0});
  if (n > arity_cap) {
    best.table = table;
    best.skipped = true;
    return best;
  }
  const auto cards = cardinalities_of(ranges);
  std::vector<std::size_t> perm = best.permutation;
  bool found = false;
  do {
    bool sorted = true;
    for (std::size_t i = 1; i < n && sorted; ++i) sorted = !(ranges[perm[i]] < ranges[perm[i - 1]]);
    if (!sorted) continue;
    auto candidate = permute_table(table, cards, perm);
    if (!found || candidate < best.table) {
      best.table = std::move(candidate);
      best.permutation = perm;
      found = true;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CanonicalFactor canonicalize_factor(const FactorGraph& fg, const Factor& f, std::size_t arity_cap) {
  return canonicalize_factor(argument_ranges(fg, f), f.table, arity_cap);
}

bool within_epsilon(const PotentialTable& a, const PotentialTable& b, double epsilon) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::fabs(a[i] - b[i]) > std::min(a[i], b[i]) * epsilon) return false;
  }
  return true;
}

FactorGrouping initial_factor_colours(const FactorGraph& fg, double epsilon, std::size_t arity_cap) {
  struct Group {
    std::vector<Range> ranges;
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;
  std::vector<CanonicalFactor> canon;
  std::vector<std::size_t> colours;
  std::vector<std::string> notices;

  for (const auto& f : fg.factors()) {
    const auto ranges = argument_ranges(fg, f);
    canon.push_back(canonicalize_factor(ranges, f.table, arity_cap));
    if (canon.back().skipped) {
      notices.push_back("factor " + f.name + " has arity " + std::to_string(ranges.size()) +
                        " above the canonicalization cap; compared by raw table");
    }
    std::vector<Range> canon_ranges;
    for (auto p : canon.back().permutation) canon_ranges.push_back(ranges[p]);

    std::size_t g = 0;
    for (; g < groups.size(); ++g) {
      if (groups[g].ranges == canon_ranges && within_epsilon(canon[groups[g].members.front()].table, canon.back().table, epsilon)) break;
    }
    if (g == groups.size()) groups.push_back({std::move(canon_ranges), {}});
    groups[g].members.push_back(canon.size() - 1);
    colours.push_back(g);
  }

  std::vector<PotentialTable> means(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& rep = canon[groups[g].members.front()].table;
    means[g] = rep;
    const auto k = static_cast<double>(groups[g].members.size());
    for (std::size_t i = 0; i < rep.size(); ++i) {
      double diff = 0.0;
      for (auto m : groups[g].members) diff += canon[m].table[i] - rep[i];
      means[g][i] = rep[i] + diff / k;
    }
  }

  std::vector<FactorSpec> specs;
  for (std::size_t i = 0; i < fg.factors().size(); ++i) {
    const auto& f = fg.factors()[i];
    FactorSpec spec{f.name, {}, means[colours[i]]};
    for (auto p : canon[i].permutation) spec.args.push_back(fg.variables()[f.args[p]].name);
    specs.push_back(std::move(spec));
  }
  return {FactorGraph(fg.variables(), std::move(specs)), std::move(colours), std::move(notices)};
}

std::vector<std::vector<std::size_t>> detect_commutative(const std::vector<Range>& ranges, const PotentialTable& table) {
  const auto n = ranges.size();
  const auto cards = cardinalities_of(ranges);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (ranges[i] != ranges[j] || find(i) == find(j)) continue;
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::swap(perm[i], perm[j]);
      if (permute_table(table, cards, perm) == table) parent[find(j)] = find(i);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < n; ++i) classes[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [_, members] : classes) {
    if (members.size() >= 2) out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> detect_commutative(const FactorGraph& fg, const Factor& f) {
  return detect_commutative(argument_ranges(fg, f), f.table);
}

Colouring colour_passing_round(const FactorGraph& fg, const Colouring& colouring) {
  const auto& factors = fg.factors();
  std::vector<std::vector<std::vector<std::size_t>>> commutative;
  for (const auto& f : factors) commutative.push_back(detect_commutative(fg, f));

  std::vector<std::vector<std::size_t>> fsigs;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    std::vector<std::size_t> args;
    for (auto a : factors[i].args) args.push_back(colouring.rv[a]);
    for (const auto& set : commutative[i]) {
      std::vector<std::size_t> values;
      for (auto p : set) values.push_back(args[p]);
      std::sort(values.begin(), values.end());
      for (std::size_t k = 0; k < set.size(); ++k) args[set[k]] = values[k];
    }
    std::vector<std::size_t> sig{colouring.factor[i]};
    sig.insert(sig.end(), args.begin(), args.end());
    fsigs.push_back(std::move(sig));
  }
  Colouring next;
  next.factor = densify(fsigs);
  next.round = colouring.round + 1;

  std::vector<std::pair<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>>> rsigs;
  for (std::size_t v = 0; v < fg.variables().size(); ++v) {
    std::vector<std::pair<std::size_t, std::size_t>> msgs;
    for (auto fi : fg.factors_of(v)) {
      const auto& args = factors[fi].args;
      const auto pos = static_cast<std::size_t>(std::find(args.begin(), args.end(), v) - args.begin());
      bool comm = false;
      for (const auto& set : commutative[fi]) comm = comm || std::find(set.begin(), set.end(), pos) != set.end();
      msgs.emplace_back(next.factor[fi], comm ? 0 : pos + 1);
    }
    std::sort(msgs.begin(), msgs.end());
    rsigs.emplace_back(colouring.rv[v], std::move(msgs));
  }
  next.rv = densify(rsigs);
  return next;
}

LiftResult run_colour_passing(const FactorGraph& fg, const Evidence& evidence, double epsilon, std::size_t arity_cap) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ParamError("epsilon must be a finite value >= 0");
  auto grouping = initial_factor_colours(fg, epsilon, arity_cap);
  LiftResult result{std::move(grouping.graph), {}, {}, std::move(grouping.notices)};
  const auto& g = result.grouped;
  Colouring col{initial_rv_colours(g, evidence), std::move(grouping.colours), 0};

  auto record = [&](const Colouring& c) {
    for (std::size_t v = 0; v < g.variables().size(); ++v) result.trace.push_back({c.round, false, g.variables()[v].name, c.rv[v]});
    for (std::size_t f = 0; f < g.factors().size(); ++f) result.trace.push_back({c.round, true, g.factors()[f].name, c.factor[f]});
  };
  record(col);
  while (true) {
    auto next = colour_passing_round(g, col);
    const bool stable = next.rv_colour_count() == col.rv_colour_count() &&
                        next.factor_colour_count() == col.factor_colour_count();
    col = std::move(next);
    record(col);
    if (stable) break;
  }
  result.colouring = std::move(col);
  return result;
}

namespace {

std::vector<std::string> split_dots(const std::string& name) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : name) {
    if (c == '.') {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(std::move(cur));
  return parts;
}

std::string lv_stem(const std::vector<std::string>& domain) {
  std::string prefix;
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto& c = domain[i];
    std::size_t k = 0;
    while (k < c.size() && std::isalpha(static_cast<unsigned char>(c[k]))) ++k;
    if (k == 0 || k == c.size()) return "X";
    for (std::size_t d = k; d < c.size(); ++d) {
      if (!std::isdigit(static_cast<unsigned char>(c[d]))) return "X";
    }
    if (i == 0) prefix = c.substr(0, k);
    else if (c.substr(0, k) != prefix) return "X";
  }
  for (auto& ch : prefix) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return prefix;
}

struct Builder {
  const FactorGraph& fg;
  std::vector<LogicalVariable> lvs;
  std::map<std::vector<std::string>, std::vector<std::string>> lvs_by_domain;
  std::set<std::string> lv_names;
  std::vector<Prv> prvs;
  std::map<std::string, std::size_t> prv_by_name;
  std::vector<Parfactor> parfactors;
  std::set<std::string> parfactor_names;

  std::string fresh(const std::string& stem, std::set<std::string>& taken) {
    std::string name = stem;
    for (std::size_t k = 1; taken.count(name); ++k) name = stem + std::to_string(k);
    taken.insert(name);
    return name;
  }

  std::string lv_for(const std::vector<std::string>& domain, const std::set<std::string>& in_use) {
    auto& candidates = lvs_by_domain[domain];
    for (const auto& name : candidates) {
      if (!in_use.count(name)) return name;
    }
    auto name = fresh(lv_stem(domain), lv_names);
    candidates.push_back(name);
    lvs.push_back({name, domain});
    return name;
  }

  std::string prv_for(const std::string& stem, const std::vector<std::string>& prv_lvs, const Range& range,
                      const std::string& pattern) {
    for (const auto& p : prvs) {
      if (p.pattern == pattern && p.lvs == prv_lvs && p.range == range) return p.name;
    }
    std::set<std::string> taken;
    for (const auto& p : prvs) taken.insert(p.name);
    auto name = fresh(stem, taken);
    prvs.push_back({name, prv_lvs, range, pattern});
    return name;
  }

  std::string parfactor_name(const std::vector<std::size_t>& members) {
    std::string stem;
    if (members.size() == 1) {
      stem = fg.factors()[members.front()].name;
    } else {
      std::vector<std::vector<std::string>> parts;
      for (auto m : members) parts.push_back(split_dots(fg.factors()[m].name));
      bool same = true;
      for (const auto& p : parts) same = same && p.size() == parts.front().size() && p.front() == parts.front().front();
      if (same) {
        stem = parts.front().front();
        for (std::size_t s = 1; s < parts.front().size(); ++s) {
          bool constant = true;
          for (const auto& p : parts) constant = constant && p[s] == parts.front()[s];
          if (constant) stem += "." + parts.front()[s];
        }
      } else {
        stem = fg.factors()[members.front()].name;
      }
    }
    return fresh(stem, parfactor_names);
  }

  void build(const std::vector<std::size_t>& members) {
    const auto& factors = fg.factors();
    const auto& vars = fg.variables();
    const auto arity = factors[members.front()].args.size();
    for (auto m : members) {
      if (factors[m].args.size() != arity || factors[m].table != factors[members.front()].table) {
        throw MalformedModel("construct_pfg: factors " + factors[members.front()].name + " and " + factors[m].name +
                             " share a colour but not a table");
      }
    }

    // Per position: literal pieces and slots that vary across members.
    struct Slot {
      std::vector<std::string> values; // per member
      std::size_t local_lv = 0;
    };
    struct Position {
      bool propositional = false;
      bool fallback = false;
      std::string base;
      std::vector<std::string> tags; // constant tags (first member's values)
      std::vector<int> slot_of_tag;  // -1 if constant
      std::vector<Slot> slots;
    };
    std::vector<Position> positions(arity);
    std::vector<std::vector<std::string>> local_seqs;
    auto local_id = [&](const std::vector<std::string>& seq) {
      for (std::size_t i = 0; i < local_seqs.size(); ++i) {
        if (local_seqs[i] == seq) return i;
      }
      local_seqs.push_back(seq);
      return local_seqs.size() - 1;
    };

    for (std::size_t p = 0; p < arity; ++p) {
      auto& pos = positions[p];
      std::vector<std::string> names;
      for (auto m : members) names.push_back(vars[factors[m].args[p]].name);
      if (std::set<std::string>(names.begin(), names.end()).size() == 1) {
        pos.propositional = true;
        pos.base = names.front();
        continue;
      }
      std::vector<std::vector<std::string>> parts;
      for (const auto& n : names) parts.push_back(split_dots(n));
      bool structured = parts.front().size() > 1;
      for (const auto& pt : parts) structured = structured && pt.size() == parts.front().size() && pt.front() == parts.front().front();
      if (!structured) {
        pos.fallback = true;
        pos.slots.push_back({names});
        pos.slots.back().local_lv = local_id(names);
        continue;
      }
      pos.base = parts.front().front();
      for (std::size_t t = 1; t < parts.front().size(); ++t) {
        std::vector<std::string> seq;
        for (const auto& pt : parts) seq.push_back(pt[t]);
        pos.tags.push_back(seq.front());
        if (std::all_of(seq.begin(), seq.end(), [&](const auto& s) { return s == seq.front(); })) {
          pos.slot_of_tag.push_back(-1);
        } else {
          pos.slot_of_tag.push_back(static_cast<int>(pos.slots.size()));
          pos.slots.push_back({seq});
          pos.slots.back().local_lv = local_id(seq);
        }
      }
    }

    // Members that would ground to the same tuple go to separate parfactors.
    std::vector<std::vector<std::string>> tuples;
    for (std::size_t i = 0; i < members.size(); ++i) {
      std::vector<std::string> t;
      for (const auto& seq : local_seqs) t.push_back(seq[i]);
      tuples.push_back(std::move(t));
    }
    std::vector<std::set<std::vector<std::string>>> layer_tuples;
    std::vector<std::vector<std::size_t>> layers;
    for (std::size_t i = 0; i < members.size(); ++i) {
      std::size_t l = 0;
      while (l < layers.size() && layer_tuples[l].count(tuples[i])) ++l;
      if (l == layers.size()) {
        layers.emplace_back();
        layer_tuples.emplace_back();
      }
      layers[l].push_back(members[i]);
      layer_tuples[l].insert(tuples[i]);
    }
    if (layers.size() > 1) {
      for (const auto& layer : layers) build(layer);
      return;
    }

    std::vector<std::string> lv_name(local_seqs.size());
    std::set<std::string> in_use;
    for (std::size_t i = 0; i < local_seqs.size(); ++i) {
      std::set<std::string> dom(local_seqs[i].begin(), local_seqs[i].end());
      lv_name[i] = lv_for(std::vector<std::string>(dom.begin(), dom.end()), in_use);
      in_use.insert(lv_name[i]);
    }

    Parfactor pf;
    pf.name = parfactor_name(members);
    pf.table = factors[members.front()].table;
    std::vector<std::string> order; // parfactor LVs by first appearance
    for (std::size_t p = 0; p < arity; ++p) {
      const auto& pos = positions[p];
      const auto& range = vars[factors[members.front()].args[p]].range;
      if (pos.propositional) {
        pf.args.push_back(prv_for(pos.base, {}, range, pos.base));
        continue;
      }
      std::vector<std::string> prv_lvs;
      auto use = [&](std::size_t local) {
        const auto& n = lv_name[local];
        if (std::find(prv_lvs.begin(), prv_lvs.end(), n) == prv_lvs.end()) prv_lvs.push_back(n);
        if (std::find(order.begin(), order.end(), n) == order.end()) order.push_back(n);
        return "{" + n + "}";
      };
      if (pos.fallback) {
        const auto pattern = use(pos.slots.front().local_lv);
        pf.args.push_back(prv_for("R", prv_lvs, range, pattern));
        continue;
      }
      std::string pattern = pos.base, stem = pos.base;
      for (std::size_t t = 0; t < pos.tags.size(); ++t) {
        if (pos.slot_of_tag[t] < 0) {
          pattern += "." + pos.tags[t];
          stem += "_" + pos.tags[t];
        } else {
          pattern += "." + use(pos.slots[static_cast<std::size_t>(pos.slot_of_tag[t])].local_lv);
        }
      }
      pf.args.push_back(prv_for(stem, prv_lvs, range, pattern));
    }

    pf.constraint.name = "c." + pf.name;
    pf.constraint.lvs = order;
    std::vector<std::vector<std::string>> ctuples;
    std::size_t product = 1;
    for (const auto& n : order) {
      const auto local = static_cast<std::size_t>(std::find(lv_name.begin(), lv_name.end(), n) - lv_name.begin());
      product *= std::set<std::string>(local_seqs[local].begin(), local_seqs[local].end()).size();
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      std::vector<std::string> t;
      for (const auto& n : order) {
        const auto local = static_cast<std::size_t>(std::find(lv_name.begin(), lv_name.end(), n) - lv_name.begin());
        t.push_back(local_seqs[local][i]);
      }
      ctuples.push_back(std::move(t));
    }
    std::sort(ctuples.begin(), ctuples.end());
    if (ctuples.size() != product) pf.constraint.tuples = std::move(ctuples);
    parfactors.push_back(std::move(pf));
  }
};

} // namespace

ParametricFactorGraph construct_pfg(const FactorGraph& fg, const Colouring& colouring) {
  if (colouring.factor.size() != fg.factors().size() || colouring.rv.size() != fg.variables().size()) {
    throw MalformedModel("construct_pfg: colouring does not match the factor graph");
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t f = 0; f < fg.factors().size(); ++f) groups[colouring.factor[f]].push_back(f);

  Builder b{fg, {}, {}, {}, {}, {}, {}, {}};
  for (const auto& [_, members] : groups) b.build(members);
  ParametricFactorGraph pfg(std::move(b.lvs), std::move(b.prvs), std::move(b.parfactors));
  if (!factor_multiset_equal(ground(pfg), fg)) {
    throw MalformedModel("construct_pfg: grounding does not reproduce the factor graph");
  }
  return pfg;
}

ParametricFactorGraph run_acp(const FactorGraph& fg, const Evidence& evidence, double epsilon) {
  auto lifted = run_colour_passing(fg, evidence, epsilon);
  return construct_pfg(lifted.grouped, lifted.colouring);
}

std::string write_trace(const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  out << "round,kind,node,colour\n";
  for (const auto& t : trace) out << t.round << ',' << (t.is_factor ? "factor" : "rv") << ',' << csv::quote(t.node) << ',' << t.colour << '\n';
  return out.str();
}

} // namespace pfgsynth
