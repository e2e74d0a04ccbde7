#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pfgsynth {

using ValueIndex = std::uint32_t;
using Range = std::vector<std::string>;

/// Dense potential table. Entries follow mixed-radix order over the argument
/// list: the first argument varies slowest, the last fastest, each argument
/// in its range order.
using PotentialTable = std::vector<double>;

/// Number of entries of a table over arguments with the given cardinalities.
std::size_t table_size(std::span<const std::size_t> cardinalities);

/// Mixed-radix strides for `cardinalities` (last argument has stride 1).
std::vector<std::size_t> table_strides(std::span<const std::size_t> cardinalities);

/// Decodes a flat table index into per-argument value indices.
std::vector<ValueIndex> decode_index(std::size_t index, std::span<const std::size_t> cardinalities);

/// Reorders a table so that new argument i is old argument `perm[i]`.
PotentialTable permute_table(const PotentialTable& table, std::span<const std::size_t> cardinalities,
                             std::span<const std::size_t> perm);

struct RandomVariable {
  std::string name;
  Range range;

  std::size_t cardinality() const { return range.size(); }
  std::optional<ValueIndex> value_index(std::string_view value) const;
};

/// Construction input for a factor: arguments are variable names.
struct FactorSpec {
  std::string name;
  std::vector<std::string> args;
  PotentialTable table;
};

struct Factor {
  std::string name;
  std::vector<std::size_t> args; // indices into FactorGraph::variables()
  PotentialTable table;
};

/// Full joint assignment keyed by variable name, values given as range labels.
using NamedAssignment = std::map<std::string, std::string>;

/// Propositional factor graph. Immutable; variables and factors are kept in
/// canonical (name-sorted) order.
class FactorGraph {
public:
  FactorGraph(std::vector<RandomVariable> variables, std::vector<FactorSpec> factors);

  const std::vector<RandomVariable>& variables() const { return variables_; }
  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t variable_count() const { return variables_.size(); }
  std::size_t factor_count() const { return factors_.size(); }

  std::optional<std::size_t> find_variable(std::string_view name) const;
  std::optional<std::size_t> find_factor(std::string_view name) const;
  const RandomVariable& variable(std::string_view name) const;

  /// Factors adjacent to variable `v`, ascending.
  const std::vector<std::size_t>& factors_of(std::size_t v) const { return adjacency_[v]; }

  std::vector<std::size_t> cardinalities(const Factor& f) const;

  /// Table offset of `f` under a full assignment indexed by variable.
  std::size_t table_offset(const Factor& f, std::span<const ValueIndex> assignment) const;

  /// Converts a named assignment to dense form. Throws IncompleteAssignment
  /// for a missing variable and MalformedModel for an unknown variable or value.
  std::vector<ValueIndex> dense_assignment(const NamedAssignment& assignment) const;

  /// Rebuilds the construction input (round-trips through the constructor).
  std::vector<FactorSpec> factor_specs() const;

private:
  std::vector<RandomVariable> variables_;
  std::vector<Factor> factors_;
  std::map<std::string, std::size_t, std::less<>> variable_index_;
  std::map<std::string, std::size_t, std::less<>> factor_index_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Product of all factor potentials at a full assignment.
double unnormalized_joint(const FactorGraph& fg, std::span<const ValueIndex> assignment);
double unnormalized_joint(const FactorGraph& fg, const NamedAssignment& assignment);

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 22;

/// Number of joint states, saturating at SIZE_MAX.
std::size_t state_count(const FactorGraph& fg);

/// Normalized joint distribution over all states in mixed-radix order of
/// fg.variables() (first variable slowest).
struct JointDistribution {
  std::vector<std::size_t> cardinalities;
  std::vector<double> probabilities;
  double partition = 0.0;

  std::vector<ValueIndex> state(std::size_t index) const;
  std::vector<double> marginal(std::size_t variable) const;
};

/// Throws TooLarge when the state space exceeds `cap`, MalformedModel when Z == 0.
JointDistribution exact_distribution(const FactorGraph& fg, std::size_t cap = kDefaultEnumerationCap);

/// Equality of factor multisets, ignoring factor names. Each factor is compared
/// in normal form: arguments sorted by name with the table permuted to match.
bool factor_multiset_equal(const FactorGraph& a, const FactorGraph& b);

// ---------------------------------------------------------------------------
// Parametric models

struct LogicalVariable {
  std::string name;
  std::vector<std::string> domain;
};

/// (lvs, C). `tuples` empty-optional means TOP: the full cross product of the
/// domains of `lvs`.
struct Constraint {
  std::string name;
  std::vector<std::string> lvs;
  std::optional<std::vector<std::vector<std::string>>> tuples;

  bool is_top() const { return !tuples.has_value(); }
};

/// Parameterised random variable. `pattern` produces ground variable names:
/// every `{L}` is replaced by the constant bound to logical variable L.
struct Prv {
  std::string name;
  std::vector<std::string> lvs;
  Range range;
  std::string pattern;

  bool is_propositional() const { return lvs.empty(); }
  std::string display() const;
  std::string ground_name(const std::map<std::string, std::string>& binding) const;
};

/// Default pattern `name.{L1}.{L2}...` (just `name` with no logical variables).
std::string default_pattern(const std::string& name, const std::vector<std::string>& lvs);

struct Parfactor {
  std::string name;
  std::vector<std::string> args; // PRV names
  Constraint constraint;
  PotentialTable table;
};

class ParametricFactorGraph {
public:
  /// Validates every invariant; throws MalformedModel. Sorts all members by name.
  ParametricFactorGraph(std::vector<LogicalVariable> lvs, std::vector<Prv> prvs,
                        std::vector<Parfactor> parfactors);

  const std::vector<LogicalVariable>& lvs() const { return lvs_; }
  const std::vector<Prv>& prvs() const { return prvs_; }
  const std::vector<Parfactor>& parfactors() const { return parfactors_; }

  const LogicalVariable& lv(std::string_view name) const;
  const Prv& prv(std::string_view name) const;

  /// LVs of a parfactor in order of first appearance in its arguments.
  std::vector<std::string> parfactor_lvs(const Parfactor& g) const;

  /// Admissible LV assignments of `g`, in constraint LV order.
  std::vector<std::vector<std::string>> groundings(const Parfactor& g) const;

private:
  std::vector<LogicalVariable> lvs_;
  std::vector<Prv> prvs_;
  std::vector<Parfactor> parfactors_;
  std::map<std::string, std::size_t, std::less<>> lv_index_;
  std::map<std::string, std::size_t, std::less<>> prv_index_;
};

/// Instantiates every parfactor under its constraint. Ground factors are named
/// `g` (no logical variables) or `g[c1,c2,...]`.
FactorGraph ground(const ParametricFactorGraph& pfg);

/// Wraps a propositional factor graph as a PFG of parameterless PRVs.
ParametricFactorGraph as_parametric(const FactorGraph& fg);

} // namespace pfgsynth
