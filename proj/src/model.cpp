#include "pfgsynth/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "pfgsynth/error.hpp"

namespace pfgsynth {

namespace {

void check_range(const std::string& owner, const Range& range) {
  if (range.size() < 2) throw MalformedModel(owner + ": range needs at least two values");
  std::set<std::string_view> seen;
  for (const auto& v : range) {
    if (!seen.insert(v).second) throw MalformedModel(owner + ": duplicate range value '" + v + "'");
  }
}

void check_table(const std::string& owner, const PotentialTable& table, std::size_t expected) {
  if (table.size() != expected) {
    throw MalformedModel(owner + ": table has " + std::to_string(table.size()) + " entries, expected " +
                         std::to_string(expected));
  }
  bool positive = false;
  for (double p : table) {
    if (!std::isfinite(p) || p < 0.0) throw MalformedModel(owner + ": potentials must be finite and nonnegative");
    positive = positive || p > 0.0;
  }
  if (!positive) throw MalformedModel(owner + ": at least one potential must be positive");
}

void check_identifier(const std::string& kind, const std::string& name) {
  if (name.empty()) throw MalformedModel(kind + " with empty name");
  for (char c : name) {
    if (c == '{' || c == '}' || std::isspace(static_cast<unsigned char>(c))) {
      throw MalformedModel(kind + " '" + name + "': names may not contain braces or whitespace");
    }
  }
}

struct PatternPiece {
  bool is_lv;
  std::string text;
};

std::vector<PatternPiece> parse_pattern(const std::string& pattern) {
  std::vector<PatternPiece> pieces;
  std::string literal;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '{') {
      const auto close = pattern.find('}', i);
      if (close == std::string::npos) throw MalformedModel("pattern '" + pattern + "': unbalanced '{'");
      if (!literal.empty()) pieces.push_back({false, std::move(literal)});
      literal.clear();
      pieces.push_back({true, pattern.substr(i + 1, close - i - 1)});
      i = close;
    } else if (pattern[i] == '}') {
      throw MalformedModel("pattern '" + pattern + "': unbalanced '}'");
    } else {
      literal.push_back(pattern[i]);
    }
  }
  if (!literal.empty()) pieces.push_back({false, std::move(literal)});
  return pieces;
}

template <class T>
std::map<std::string, std::size_t, std::less<>> index_by_name(const std::vector<T>& items, const std::string& kind) {
  std::map<std::string, std::size_t, std::less<>> idx;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!idx.emplace(items[i].name, i).second) throw MalformedModel("duplicate " + kind + " '" + items[i].name + "'");
  }
  return idx;
}

template <class T>
void sort_by_name(std::vector<T>& items) {
  std::sort(items.begin(), items.end(), [](const T& a, const T& b) { return a.name < b.name; });
}

} // namespace

std::size_t table_size(std::span<const std::size_t> cardinalities) {
  std::size_t n = 1;
  for (auto c : cardinalities) n *= c;
  return n;
}

std::vector<std::size_t> table_strides(std::span<const std::size_t> cardinalities) {
  std::vector<std::size_t> strides(cardinalities.size(), 1);
  for (std::size_t i = cardinalities.size(); i-- > 1;) strides[i - 1] = strides[i] * cardinalities[i];
  return strides;
}

std::vector<ValueIndex> decode_index(std::size_t index, std::span<const std::size_t> cardinalities) {
  std::vector<ValueIndex> values(cardinalities.size());
  for (std::size_t i = cardinalities.size(); i-- > 0;) {
    values[i] = static_cast<ValueIndex>(index % cardinalities[i]);
    index /= cardinalities[i];
  }
  return values;
}

PotentialTable permute_table(const PotentialTable& table, std::span<const std::size_t> cardinalities,
                             std::span<const std::size_t> perm) {
  std::vector<std::size_t> new_cards(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) new_cards[i] = cardinalities[perm[i]];
  const auto old_strides = table_strides(cardinalities);
  PotentialTable out(table.size());
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    const auto nv = decode_index(idx, new_cards);
    std::size_t old = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) old += nv[i] * old_strides[perm[i]];
    out[idx] = table[old];
  }
  return out;
}

std::optional<ValueIndex> RandomVariable::value_index(std::string_view value) const {
  for (std::size_t i = 0; i < range.size(); ++i) {
    if (range[i] == value) return static_cast<ValueIndex>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

FactorGraph::FactorGraph(std::vector<RandomVariable> variables, std::vector<FactorSpec> factors)
    : variables_(std::move(variables)) {
  if (variables_.empty()) throw MalformedModel("factor graph has no variables");
  if (factors.empty()) throw MalformedModel("factor graph has no factors");
  sort_by_name(variables_);
  for (const auto& v : variables_) {
    check_identifier("variable", v.name);
    check_range("variable '" + v.name + "'", v.range);
  }
  variable_index_ = index_by_name(variables_, "variable");

  sort_by_name(factors);
  factors_.reserve(factors.size());
  adjacency_.resize(variables_.size());
  for (auto& spec : factors) {
    const std::string owner = "factor '" + spec.name + "'";
    if (spec.name.empty()) throw MalformedModel("factor with empty name");
    if (spec.args.empty()) throw MalformedModel(owner + ": no arguments");
    Factor f{std::move(spec.name), {}, std::move(spec.table)};
    std::set<std::size_t> seen;
    std::size_t expected = 1;
    for (const auto& a : spec.args) {
      auto it = variable_index_.find(a);
      if (it == variable_index_.end()) throw MalformedModel(owner + ": undeclared argument '" + a + "'");
      if (!seen.insert(it->second).second) throw MalformedModel(owner + ": argument '" + a + "' repeated");
      f.args.push_back(it->second);
      expected *= variables_[it->second].cardinality();
    }
    check_table(owner, f.table, expected);
    for (auto v : f.args) adjacency_[v].push_back(factors_.size());
    factors_.push_back(std::move(f));
  }
  factor_index_ = index_by_name(factors_, "factor");
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    if (adjacency_[v].empty()) throw MalformedModel("variable '" + variables_[v].name + "' is in no factor");
  }
}

std::optional<std::size_t> FactorGraph::find_variable(std::string_view name) const {
  auto it = variable_index_.find(name);
  if (it == variable_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> FactorGraph::find_factor(std::string_view name) const {
  auto it = factor_index_.find(name);
  if (it == factor_index_.end()) return std::nullopt;
  return it->second;
}

const RandomVariable& FactorGraph::variable(std::string_view name) const {
  auto idx = find_variable(name);
  if (!idx) throw MalformedModel("unknown variable '" + std::string(name) + "'");
  return variables_[*idx];
}

std::vector<std::size_t> FactorGraph::cardinalities(const Factor& f) const {
  std::vector<std::size_t> cards;
  cards.reserve(f.args.size());
  for (auto a : f.args) cards.push_back(variables_[a].cardinality());
  return cards;
}

std::size_t FactorGraph::table_offset(const Factor& f, std::span<const ValueIndex> assignment) const {
  std::size_t offset = 0;
  for (auto a : f.args) offset = offset * variables_[a].cardinality() + assignment[a];
  return offset;
}

std::vector<ValueIndex> FactorGraph::dense_assignment(const NamedAssignment& assignment) const {
  for (const auto& [name, value] : assignment) {
    if (!find_variable(name)) throw MalformedModel("assignment names unknown variable '" + name + "'");
  }
  std::vector<ValueIndex> dense(variables_.size());
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    auto it = assignment.find(variables_[v].name);
    if (it == assignment.end()) throw IncompleteAssignment("no value for variable '" + variables_[v].name + "'");
    auto idx = variables_[v].value_index(it->second);
    if (!idx) throw MalformedModel("value '" + it->second + "' not in range of '" + variables_[v].name + "'");
    dense[v] = *idx;
  }
  return dense;
}

std::vector<FactorSpec> FactorGraph::factor_specs() const {
  std::vector<FactorSpec> specs;
  specs.reserve(factors_.size());
  for (const auto& f : factors_) {
    FactorSpec s{f.name, {}, f.table};
    for (auto a : f.args) s.args.push_back(variables_[a].name);
    specs.push_back(std::move(s));
  }
  return specs;
}

double unnormalized_joint(const FactorGraph& fg, std::span<const ValueIndex> assignment) {
  if (assignment.size() != fg.variable_count()) {
    throw IncompleteAssignment("assignment covers " + std::to_string(assignment.size()) + " of " +
                               std::to_string(fg.variable_count()) + " variables");
  }
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    if (assignment[v] >= fg.variables()[v].cardinality())
      throw MalformedModel("value index out of range for '" + fg.variables()[v].name + "'");
  }
  double product = 1.0;
  for (const auto& f : fg.factors()) product *= f.table[fg.table_offset(f, assignment)];
  return product;
}

double unnormalized_joint(const FactorGraph& fg, const NamedAssignment& assignment) {
  const auto dense = fg.dense_assignment(assignment);
  return unnormalized_joint(fg, dense);
}

std::size_t state_count(const FactorGraph& fg) {
  std::size_t n = 1;
  for (const auto& v : fg.variables()) {
    if (n > std::numeric_limits<std::size_t>::max() / v.cardinality()) return std::numeric_limits<std::size_t>::max();
    n *= v.cardinality();
  }
  return n;
}

std::vector<ValueIndex> JointDistribution::state(std::size_t index) const {
  return decode_index(index, cardinalities);
}

std::vector<double> JointDistribution::marginal(std::size_t variable) const {
  std::vector<double> m(cardinalities.at(variable), 0.0);
  const auto strides = table_strides(cardinalities);
  for (std::size_t s = 0; s < probabilities.size(); ++s) {
    m[(s / strides[variable]) % cardinalities[variable]] += probabilities[s];
  }
  return m;
}

JointDistribution exact_distribution(const FactorGraph& fg, std::size_t cap) {
  const std::size_t states = state_count(fg);
  if (states > cap) {
    throw TooLarge("joint state space has " +
                   (states == std::numeric_limits<std::size_t>::max() ? std::string("more than 2^64")
                                                                      : std::to_string(states)) +
                   " states, enumeration cap is " + std::to_string(cap) + "; use Gibbs sampling");
  }
  JointDistribution d;
  for (const auto& v : fg.variables()) d.cardinalities.push_back(v.cardinality());
  d.probabilities.resize(states);

  std::vector<ValueIndex> x(fg.variable_count(), 0);
  double z = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    double p = 1.0;
    for (const auto& f : fg.factors()) p *= f.table[fg.table_offset(f, x)];
    d.probabilities[s] = p;
    z += p;
    for (std::size_t v = x.size(); v-- > 0;) {
      if (++x[v] < d.cardinalities[v]) break;
      x[v] = 0;
    }
  }
  if (!(z > 0.0)) throw MalformedModel("normalization constant is zero");
  for (auto& p : d.probabilities) p /= z;
  d.partition = z;
  return d;
}

bool factor_multiset_equal(const FactorGraph& a, const FactorGraph& b) {
  if (a.factor_count() != b.factor_count()) return false;
  using Key = std::tuple<std::vector<std::string>, std::vector<Range>, PotentialTable>;
  auto normal_forms = [](const FactorGraph& g) {
    std::vector<Key> keys;
    keys.reserve(g.factor_count());
    for (const auto& f : g.factors()) {
      std::vector<std::size_t> perm(f.args.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::sort(perm.begin(), perm.end(), [&](std::size_t i, std::size_t j) {
        return g.variables()[f.args[i]].name < g.variables()[f.args[j]].name;
      });
      Key k;
      for (auto p : perm) {
        std::get<0>(k).push_back(g.variables()[f.args[p]].name);
        std::get<1>(k).push_back(g.variables()[f.args[p]].range);
      }
      std::get<2>(k) = permute_table(f.table, g.cardinalities(f), perm);
      keys.push_back(std::move(k));
    }
    std::sort(keys.begin(), keys.end());
    return keys;
  };
  return normal_forms(a) == normal_forms(b);
}

// ---------------------------------------------------------------------------

std::string Prv::display() const {
  if (lvs.empty()) return name;
  std::string s = name + "(";
  for (std::size_t i = 0; i < lvs.size(); ++i) s += (i ? "," : "") + lvs[i];
  return s + ")";
}

std::string Prv::ground_name(const std::map<std::string, std::string>& binding) const {
  std::string out;
  for (const auto& piece : parse_pattern(pattern)) {
    if (!piece.is_lv) {
      out += piece.text;
      continue;
    }
    auto it = binding.find(piece.text);
    if (it == binding.end()) throw MalformedModel("PRV '" + name + "': unbound logical variable '" + piece.text + "'");
    out += it->second;
  }
  return out;
}

std::string default_pattern(const std::string& name, const std::vector<std::string>& lvs) {
  std::string p = name;
  for (const auto& l : lvs) p += ".{" + l + "}";
  return p;
}

ParametricFactorGraph::ParametricFactorGraph(std::vector<LogicalVariable> lvs, std::vector<Prv> prvs,
                                             std::vector<Parfactor> parfactors)
    : lvs_(std::move(lvs)), prvs_(std::move(prvs)), parfactors_(std::move(parfactors)) {
  sort_by_name(lvs_);
  sort_by_name(prvs_);
  sort_by_name(parfactors_);
  if (parfactors_.empty()) throw MalformedModel("parametric model has no parfactors");
  lv_index_ = index_by_name(lvs_, "logical variable");
  prv_index_ = index_by_name(prvs_, "PRV");
  std::set<std::string> parfactor_names;

  for (const auto& l : lvs_) {
    check_identifier("logical variable", l.name);
    if (l.domain.empty()) throw MalformedModel("logical variable '" + l.name + "': empty domain");
    std::set<std::string_view> seen;
    for (const auto& c : l.domain) {
      if (!seen.insert(c).second) throw MalformedModel("logical variable '" + l.name + "': duplicate constant '" + c + "'");
    }
  }
  for (const auto& p : prvs_) {
    const std::string owner = "PRV '" + p.name + "'";
    check_identifier("PRV", p.name);
    check_range(owner, p.range);
    std::set<std::string> declared;
    for (const auto& l : p.lvs) {
      if (!lv_index_.count(l)) throw MalformedModel(owner + ": undeclared logical variable '" + l + "'");
      if (!declared.insert(l).second) throw MalformedModel(owner + ": logical variable '" + l + "' repeated");
    }
    std::set<std::string> referenced;
    for (const auto& piece : parse_pattern(p.pattern)) {
      if (!piece.is_lv) continue;
      if (!declared.count(piece.text))
        throw MalformedModel(owner + ": pattern references '" + piece.text + "' which is not among its logical variables");
      referenced.insert(piece.text);
    }
    if (referenced != declared) throw MalformedModel(owner + ": pattern must reference every logical variable");
    if (p.pattern.empty()) throw MalformedModel(owner + ": empty pattern");
  }
  for (const auto& g : parfactors_) {
    const std::string owner = "parfactor '" + g.name + "'";
    if (g.name.empty()) throw MalformedModel("parfactor with empty name");
    if (g.args.empty()) throw MalformedModel(owner + ": no arguments");
    std::size_t expected = 1;
    for (const auto& a : g.args) {
      auto it = prv_index_.find(a);
      if (it == prv_index_.end()) throw MalformedModel(owner + ": undeclared PRV '" + a + "'");
      expected *= prvs_[it->second].range.size();
    }
    check_table(owner, g.table, expected);

    const auto needed = parfactor_lvs(g);
    const std::set<std::string> needed_set(needed.begin(), needed.end());
    const auto& c = g.constraint;
    std::set<std::string> constraint_set;
    for (const auto& l : c.lvs) {
      if (!constraint_set.insert(l).second) throw MalformedModel(owner + ": constraint repeats logical variable '" + l + "'");
    }
    if (constraint_set != needed_set)
      throw MalformedModel(owner + ": constraint must range over exactly the logical variables of its arguments");
    if (c.tuples) {
      if (c.tuples->empty()) throw MalformedModel(owner + ": explicit constraint with no tuples");
      std::set<std::vector<std::string>> seen;
      for (const auto& t : *c.tuples) {
        if (t.size() != c.lvs.size()) throw MalformedModel(owner + ": constraint tuple has wrong arity");
        for (std::size_t i = 0; i < t.size(); ++i) {
          const auto& dom = lvs_[lv_index_.at(c.lvs[i])].domain;
          if (std::find(dom.begin(), dom.end(), t[i]) == dom.end()) {
            throw MalformedModel(owner + ": constraint constant '" + t[i] + "' is outside the domain of " + c.lvs[i]);
          }
        }
        if (!seen.insert(t).second) throw MalformedModel(owner + ": duplicate constraint tuple");
      }
    }
    if (!parfactor_names.insert(g.name).second) throw MalformedModel("duplicate parfactor '" + g.name + "'");
  }
}

const LogicalVariable& ParametricFactorGraph::lv(std::string_view name) const {
  auto it = lv_index_.find(name);
  if (it == lv_index_.end()) throw MalformedModel("unknown logical variable '" + std::string(name) + "'");
  return lvs_[it->second];
}

const Prv& ParametricFactorGraph::prv(std::string_view name) const {
  auto it = prv_index_.find(name);
  if (it == prv_index_.end()) throw MalformedModel("unknown PRV '" + std::string(name) + "'");
  return prvs_[it->second];
}

std::vector<std::string> ParametricFactorGraph::parfactor_lvs(const Parfactor& g) const {
  std::vector<std::string> out;
  for (const auto& a : g.args) {
    for (const auto& l : prv(a).lvs) {
      if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
  }
  return out;
}

std::vector<std::vector<std::string>> ParametricFactorGraph::groundings(const Parfactor& g) const {
  if (g.constraint.tuples) return *g.constraint.tuples;
  std::vector<const std::vector<std::string>*> domains;
  for (const auto& l : g.constraint.lvs) domains.push_back(&lv(l).domain);
  std::vector<std::vector<std::string>> out;
  std::vector<std::size_t> idx(domains.size(), 0);
  while (true) {
    std::vector<std::string> t;
    for (std::size_t i = 0; i < domains.size(); ++i) t.push_back((*domains[i])[idx[i]]);
    out.push_back(std::move(t));
    std::size_t i = domains.size();
    while (i-- > 0) {
      if (++idx[i] < domains[i]->size()) break;
      idx[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

FactorGraph ground(const ParametricFactorGraph& pfg) {
  std::map<std::string, Range> variables;
  std::vector<FactorSpec> factors;
  for (const auto& g : pfg.parfactors()) {
    for (const auto& tuple : pfg.groundings(g)) {
      std::map<std::string, std::string> binding;
      for (std::size_t i = 0; i < tuple.size(); ++i) binding[g.constraint.lvs[i]] = tuple[i];
      FactorSpec f{g.name, {}, g.table};
      if (!tuple.empty()) {
        f.name += "[";
        for (std::size_t i = 0; i < tuple.size(); ++i) f.name += (i ? "," : "") + tuple[i];
        f.name += "]";
      }
      for (const auto& a : g.args) {
        const auto& p = pfg.prv(a);
        auto name = p.ground_name(binding);
        auto [it, inserted] = variables.emplace(name, p.range);
        if (!inserted && it->second != p.range)
          throw MalformedModel("ground variable '" + name + "' is produced with two different ranges");
        f.args.push_back(std::move(name));
      }
      factors.push_back(std::move(f));
    }
  }
  std::vector<RandomVariable> vars;
  vars.reserve(variables.size());
  for (auto& [name, range] : variables) vars.push_back({name, std::move(range)});
  return FactorGraph(std::move(vars), std::move(factors));
}

ParametricFactorGraph as_parametric(const FactorGraph& fg) {
  std::vector<Prv> prvs;
  for (const auto& v : fg.variables()) prvs.push_back({v.name, {}, v.range, v.name});
  std::vector<Parfactor> parfactors;
  for (auto& spec : fg.factor_specs()) {
    parfactors.push_back({spec.name, spec.args, Constraint{"c." + spec.name, {}, std::nullopt}, spec.table});
  }
  return ParametricFactorGraph({}, std::move(prvs), std::move(parfactors));
}

} // namespace pfgsynth
