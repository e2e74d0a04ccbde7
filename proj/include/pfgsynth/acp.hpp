#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "pfgsynth/model.hpp"

namespace pfgsynth {

/// Observed values keyed by RV name.
using Evidence = std::map<std::string, std::string>;

/// Colours are dense ids; indices follow fg.variables() and fg.factors().
struct Colouring {
  std::vector<std::size_t> rv;
  std::vector<std::size_t> factor;
  std::size_t round = 0;

  std::size_t rv_colour_count() const;
  std::size_t factor_colour_count() const;
};

/// Equal colour iff equal range and equal evidence status. Throws
/// MalformedModel for evidence on an unknown RV or outside its range.
std::vector<std::size_t> initial_rv_colours(const FactorGraph& fg, const Evidence& evidence);

inline constexpr std::size_t kCanonicalArityCap = 5;

struct CanonicalFactor {
  PotentialTable table;
  /// Canonical argument i is original argument permutation[i].
  std::vector<std::size_t> permutation;
  /// Arity exceeded the cap; the identity permutation was used.
  bool skipped = false;
};

/// Among the argument orders that sort argument ranges, picks the one whose
/// permuted table is lexicographically smallest (ties: smallest permutation).
CanonicalFactor canonicalize_factor(const std::vector<Range>& ranges, const PotentialTable& table,
                                    std::size_t arity_cap = kCanonicalArityCap);
CanonicalFactor canonicalize_factor(const FactorGraph& fg, const Factor& f, std::size_t arity_cap = kCanonicalArityCap);

/// True iff |a - b| <= min(a, b) * epsilon for every entry.
bool within_epsilon(const PotentialTable& a, const PotentialTable& b, double epsilon);

struct FactorGrouping {
  /// Input graph with arguments in canonical order and each table replaced by
  /// its group's entrywise mean.
  FactorGraph graph;
  std::vector<std::size_t> colours;
  std::vector<std::string> notices;
};

/// Greedy first-fit epsilon grouping in factor name order.
FactorGrouping initial_factor_colours(const FactorGraph& fg, double epsilon,
                                      std::size_t arity_cap = kCanonicalArityCap);

/// Classes (size >= 2) of argument positions whose pairwise transpositions
/// leave the table unchanged. Positions are 0-based and ascending.
std::vector<std::vector<std::size_t>> detect_commutative(const std::vector<Range>& ranges, const PotentialTable& table);
std::vector<std::vector<std::size_t>> detect_commutative(const FactorGraph& fg, const Factor& f);

/// One factor pass followed by one RV pass.
Colouring colour_passing_round(const FactorGraph& fg, const Colouring& colouring);

struct TraceEntry {
  std::size_t round;
  bool is_factor;
  std::string node;
  std::size_t colour;
};

struct LiftResult {
  FactorGraph grouped; // after canonical reordering and mean assignment
  Colouring colouring;
  std::vector<TraceEntry> trace;
  std::vector<std::string> notices;
};

/// Colour passing to a fixed point. Throws ParamError for a negative or
/// non-finite epsilon.
LiftResult run_colour_passing(const FactorGraph& fg, const Evidence& evidence, double epsilon,
                              std::size_t arity_cap = kCanonicalArityCap);

/// One parfactor per factor colour (split further when members would ground
/// to the same logical-variable tuple).
ParametricFactorGraph construct_pfg(const FactorGraph& fg, const Colouring& colouring);

ParametricFactorGraph run_acp(const FactorGraph& fg, const Evidence& evidence, double epsilon);

std::string write_trace(const std::vector<TraceEntry>& trace);

} // namespace pfgsynth
