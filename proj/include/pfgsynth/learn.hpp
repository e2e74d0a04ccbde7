#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pfgsynth/clustering.hpp"
#include "pfgsynth/join.hpp"
#include "pfgsynth/model.hpp"
#include "pfgsynth/schema.hpp"

namespace pfgsynth {

/// Column-level dependency structure. `nodes` are sorted by name; edges and
/// cliques refer to node indices, each sorted ascending.
struct ColumnSkeleton {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<std::size_t>> cliques;

  bool adjacent(std::size_t a, std::size_t b) const;
};

/// Join columns that become random variables: entity attributes, relationship
/// indicators and relationship attributes, sorted by name.
std::vector<std::string> learnable_columns(const AugmentedJoin& join);

/// One RV per attribute per cluster of its owner, one Boolean RV per
/// relationship per participant-cluster combination and one RV per
/// relationship attribute per combination.
std::vector<RandomVariable> build_random_variables(const ErSchema& schema, const ClusterAssignment& clusters);

struct CiOutcome {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool independent = true;
};

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr std::size_t kDefaultMaxCondition = 2;

/// G-test of x independent of y given z, stratified over z assignments. Rows
/// with an absent value in any involved column are ignored. Throws
/// CiTestError when no row is usable.
CiOutcome ci_test(const AugmentedJoin& join, const std::string& x, const std::string& y,
                  const std::vector<std::string>& z, double alpha);

/// PC-stable skeleton search followed by maximal-clique enumeration.
ColumnSkeleton learn_skeleton(const AugmentedJoin& join, const std::vector<std::string>& columns, double alpha,
                              std::size_t max_condition_size = kDefaultMaxCondition);

/// Bron-Kerbosch with pivoting; isolated nodes form singleton cliques.
std::vector<std::vector<std::size_t>> maximal_cliques(std::size_t n,
                                                      const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Throws ParamError for unknown or repeated endpoints and self loops.
ColumnSkeleton skeleton_from_edges(std::vector<std::string> nodes,
                                   const std::vector<std::pair<std::string, std::string>>& edges);

/// Text form: `node <name>`, `edge <a> <b>` and `clique <names...>` lines.
std::string write_skeleton(const ColumnSkeleton& skeleton);
/// Reads the edges of a skeleton file over the given nodes; clique lines are
/// recomputed rather than trusted.
ColumnSkeleton parse_skeleton(const std::string& text, std::vector<std::string> nodes);

struct FactorSignature {
  std::string name;
  std::vector<std::string> columns;                  // join columns, one per argument
  std::vector<std::string> args;                     // ground RV names
  std::map<std::string, std::string> cluster_filter; // entity class -> cluster label
};

std::vector<FactorSignature> instantiate_factors(const ErSchema& schema, const ColumnSkeleton& skeleton,
                                                 const ClusterAssignment& clusters);

inline constexpr double kDefaultSmoothing = 0.5;

/// Counts join rows per factor assignment within the factor's clusters, plus
/// `smoothing` on every entry when given. Throws DegenerateFactor for an
/// all-zero table.
FactorGraph learn_potentials(const AugmentedJoin& join, const ErSchema& schema, const RelationalInstance& inst,
                             const ClusterAssignment& clusters, const std::vector<FactorSignature>& signatures,
                             std::optional<double> smoothing = std::nullopt);

} // namespace pfgsynth
