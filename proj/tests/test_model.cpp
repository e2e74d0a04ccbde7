#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pfgsynth/error.hpp"
#include "pfgsynth/model.hpp"
#include "pfgsynth/model_io.hpp"
#include "support.hpp"

using namespace pfgsynth;

namespace {

const Range kBool{"true", "false"};

FactorGraph coin(double t, double f) { return FactorGraph({{"A", kBool}}, {{"phi", {"A"}, {t, f}}}); }

std::size_t count_prefix(const FactorGraph& fg, const std::string& prefix) {
  return static_cast<std::size_t>(std::count_if(fg.factors().begin(), fg.factors().end(), [&](const Factor& f) {
    return f.name == prefix || f.name.rfind(prefix + "[", 0) == 0;
  }));
}

} // namespace

TEST(Tables, MixedRadixFirstArgumentSlowest) {
  const std::vector<std::size_t> cards{2, 3};
  EXPECT_EQ(table_size(cards), 6u);
  EXPECT_EQ(table_strides(cards), (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(decode_index(4, cards), (std::vector<ValueIndex>{1, 1}));
  EXPECT_EQ(decode_index(2, cards), (std::vector<ValueIndex>{0, 2}));
}

TEST(Tables, PermuteSwapsArguments) {
  const std::vector<std::size_t> cards{2, 3};
  const PotentialTable t{1, 2, 3, 4, 5, 6};
  const std::vector<std::size_t> perm{1, 0};
  // new(x1 = old arg 1, x2 = old arg 0)
  EXPECT_EQ(permute_table(t, cards, perm), (PotentialTable{1, 4, 2, 5, 3, 6}));
  const std::vector<std::size_t> back_cards{3, 2};
  EXPECT_EQ(permute_table(permute_table(t, cards, perm), back_cards, perm), t);
}

TEST(FactorGraph, SingleFactorProduct) {
  const auto fg = coin(2, 3);
  EXPECT_EQ(unnormalized_joint(fg, NamedAssignment{{"A", "true"}}), 2.0);
  EXPECT_EQ(unnormalized_joint(fg, NamedAssignment{{"A", "false"}}), 3.0);
}

TEST(FactorGraph, ConstructionInvariants) {
  EXPECT_THROW(FactorGraph({{"A", kBool}}, {}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", kBool}, {"B", kBool}}, {{"phi", {"A"}, {1, 1}}}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", kBool}}, {{"phi", {"A", "A"}, {1, 1, 1, 1}}}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", kBool}}, {{"phi", {"B"}, {1, 1}}}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", kBool}}, {{"phi", {"A"}, {1, -1}}}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", kBool}}, {{"phi", {"A"}, {0, 0}}}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", kBool}}, {{"phi", {"A"}, {1, 2, 3}}}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", {"x"}}}, {{"phi", {"A"}, {1}}}), MalformedModel);
  EXPECT_THROW(FactorGraph({{"A", {"x", "x"}}}, {{"phi", {"A"}, {1, 1}}}), MalformedModel);
  EXPECT_NO_THROW(FactorGraph({{"A", kBool}}, {{"phi", {"A"}, {0, 1}}}));
}

TEST(FactorGraph, AssignmentErrors) {
  const FactorGraph fg({{"A", kBool}, {"B", kBool}}, {{"phi", {"A", "B"}, {1, 2, 3, 4}}});
  EXPECT_THROW(unnormalized_joint(fg, NamedAssignment{{"A", "true"}}), IncompleteAssignment);
  EXPECT_THROW(unnormalized_joint(fg, NamedAssignment{{"A", "true"}, {"B", "maybe"}}), MalformedModel);
  EXPECT_THROW(unnormalized_joint(fg, NamedAssignment{{"A", "true"}, {"B", "true"}, {"C", "true"}}), MalformedModel);
  EXPECT_EQ(unnormalized_joint(fg, NamedAssignment{{"A", "false"}, {"B", "true"}}), 3.0);
}

TEST(FactorGraph, CanonicalOrderIsByName) {
  const FactorGraph fg({{"b", kBool}, {"a", kBool}}, {{"z", {"b"}, {1, 2}}, {"y", {"a", "b"}, {1, 2, 3, 4}}});
  EXPECT_EQ(fg.variables()[0].name, "a");
  EXPECT_EQ(fg.factors()[0].name, "y");
  EXPECT_EQ(fg.factors_of(1), (std::vector<std::size_t>{0, 1}));
}

TEST(ExactDistribution, NormalizesUnaryFactors) {
  auto fair = exact_distribution(coin(1, 1));
  EXPECT_DOUBLE_EQ(fair.probabilities[0], 0.5);
  EXPECT_DOUBLE_EQ(fair.probabilities[1], 0.5);
  auto skewed = exact_distribution(coin(3, 1));
  EXPECT_DOUBLE_EQ(skewed.probabilities[0], 0.75);
  EXPECT_DOUBLE_EQ(skewed.probabilities[1], 0.25);
  EXPECT_DOUBLE_EQ(skewed.partition, 4.0);
}

TEST(ExactDistribution, CapAndZeroPartition) {
  EXPECT_THROW(exact_distribution(coin(1, 1), 1), TooLarge);
  // Z = 0: the only positive entries of the two factors contradict each other.
  const FactorGraph fg({{"A", kBool}}, {{"p", {"A"}, {1, 0}}, {"q", {"A"}, {0, 1}}});
  EXPECT_THROW(exact_distribution(fg), MalformedModel);
}

TEST(ExactDistribution, ToyAssignmentMatchesPerFactorLookup) {
  const auto fg = support::toy_model();
  ASSERT_EQ(fg.factor_count(), 12u);
  const NamedAssignment world{{"Age.p1", "<18"},          {"Age.p2", ">=18"},       {"Costs.m1", "low"},
                              {"Costs.m2", "high"},       {"Treat.p1.m1", "false"}, {"Treat.p1.m2", "false"},
                              {"Treat.p2.m1", "true"},    {"Treat.p2.m2", "false"}};
  double expected = 1.0;
  for (const auto& f : fg.factors()) {
    std::vector<std::size_t> cards;
    for (auto a : f.args) cards.push_back(fg.variables()[a].cardinality());
    bool found = false;
    for (std::size_t i = 0; i < f.table.size(); ++i) {
      const auto values = decode_index(i, cards);
      bool match = true;
      for (std::size_t p = 0; p < f.args.size(); ++p) {
        const auto& v = fg.variables()[f.args[p]];
        match = match && v.range[values[p]] == world.at(v.name);
      }
      if (match) {
        expected *= f.table[i];
        found = true;
      }
    }
    ASSERT_TRUE(found) << f.name;
  }
  EXPECT_EQ(unnormalized_joint(fg, world), expected);
}

TEST(ExactDistribution, ToyMarginalTwoSummationOrders) {
  const auto fg = support::toy_model(0.5);
  const auto dist = exact_distribution(fg);
  const auto v = *fg.find_variable("Age.p2");
  const auto marginal = dist.marginal(v);

  double total = 0.0, young = 0.0;
  for (std::size_t i = dist.probabilities.size(); i-- > 0;) {
    total += dist.probabilities[i];
    if (dist.state(i)[v] == 0) young += dist.probabilities[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_NEAR(marginal[0], young, 1e-12);
  EXPECT_NEAR(marginal[0] + marginal[1], 1.0, 1e-12);
}

TEST(ExactDistribution, RandomModelsSumToOne) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fg = support::random_factor_graph(rng, 10);
    try {
      const auto dist = exact_distribution(fg);
      double total = 0.0;
      for (auto p : dist.probabilities) {
        EXPECT_GE(p, 0.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    } catch (const MalformedModel&) {
      // Z may be zero when count tables contradict each other.
    }
  }
}

TEST(FactorGraph, JointIsMultiplicativeOverDisjointComponents) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto left = support::random_factor_graph(rng, 8);
    const auto right = support::random_factor_graph(rng, 8);
    std::vector<RandomVariable> vars;
    std::vector<FactorSpec> specs;
    for (const auto& v : left.variables()) vars.push_back({"L_" + v.name, v.range});
    for (const auto& v : right.variables()) vars.push_back({"R_" + v.name, v.range});
    for (auto s : left.factor_specs()) {
      for (auto& a : s.args) a = "L_" + a;
      s.name = "L_" + s.name;
      specs.push_back(s);
    }
    for (auto s : right.factor_specs()) {
      for (auto& a : s.args) a = "R_" + a;
      s.name = "R_" + s.name;
      specs.push_back(s);
    }
    const FactorGraph both(vars, specs);

    NamedAssignment l, r, all;
    for (const auto& v : left.variables()) all["L_" + v.name] = l[v.name] = v.range[rng.below(v.cardinality())];
    for (const auto& v : right.variables()) all["R_" + v.name] = r[v.name] = v.range[rng.below(v.cardinality())];
    EXPECT_EQ(unnormalized_joint(both, all), unnormalized_joint(left, l) * unnormalized_joint(right, r));
  }
}

TEST(FactorMultiset, IgnoresNamesAndArgumentOrder) {
  const FactorGraph a({{"x", kBool}, {"y", kBool}}, {{"f", {"x", "y"}, {1, 2, 3, 4}}});
  const FactorGraph renamed({{"x", kBool}, {"y", kBool}}, {{"g", {"x", "y"}, {1, 2, 3, 4}}});
  const FactorGraph swapped({{"x", kBool}, {"y", kBool}}, {{"f", {"y", "x"}, {1, 3, 2, 4}}});
  const FactorGraph perturbed({{"x", kBool}, {"y", kBool}}, {{"f", {"x", "y"}, {1, 2, 3, 4.5}}});
  EXPECT_TRUE(factor_multiset_equal(a, renamed));
  EXPECT_TRUE(factor_multiset_equal(a, swapped));
  EXPECT_FALSE(factor_multiset_equal(a, perturbed));

  const FactorGraph twice({{"x", kBool}, {"y", kBool}},
                          {{"f", {"x", "y"}, {1, 2, 3, 4}}, {"g", {"x", "y"}, {1, 2, 3, 4}}});
  EXPECT_FALSE(factor_multiset_equal(a, twice));
}

TEST(Grounding, EpidemicCountsPerParfactor) {
  const auto pfg = load_parametric(support::test_data("epidemic.pfg"));
  const auto fg = ground(pfg);
  EXPECT_EQ(fg.variable_count(), 17u);
  EXPECT_EQ(fg.factor_count(), 17u);
  EXPECT_EQ(count_prefix(fg, "g0"), 1u);
  EXPECT_EQ(count_prefix(fg, "g1"), 4u);
  EXPECT_EQ(count_prefix(fg, "g2"), 8u);
  EXPECT_EQ(count_prefix(fg, "g3"), 4u);
  for (const auto& g : pfg.parfactors()) {
    std::size_t expected = 1;
    for (const auto& l : g.constraint.lvs) expected *= pfg.lv(l).domain.size();
    EXPECT_EQ(pfg.groundings(g).size(), expected) << g.name;
    EXPECT_EQ(count_prefix(fg, g.name), expected) << g.name;
  }
  EXPECT_TRUE(fg.find_variable("Treat.dave.m2").has_value());
  EXPECT_TRUE(fg.find_factor("g2[eve,m1]").has_value());
}

TEST(Grounding, ExplicitConstraintFilters) {
  const ParametricFactorGraph pfg({{"X", {"a", "b", "c"}}}, {{"R", {"X"}, kBool, "R.{X}"}},
                                  {{"phi", {"R"}, {"c", {"X"}, std::vector<std::vector<std::string>>{{"a"}, {"b"}}}, {1, 2}}});
  const auto fg = ground(pfg);
  ASSERT_EQ(fg.factor_count(), 2u);
  EXPECT_EQ(fg.variables()[0].name, "R.a");
  EXPECT_EQ(fg.variables()[1].name, "R.b");
}

TEST(Grounding, ParameterlessIsIdentity) {
  const auto fg = load_factor_graph(support::test_data("shared_table.fg"));
  const auto back = ground(as_parametric(fg));
  EXPECT_TRUE(factor_multiset_equal(back, fg));
  EXPECT_EQ(write_model(back), write_model(fg));
}

TEST(Grounding, Deterministic) {
  const auto pfg = load_parametric(support::test_data("epidemic.pfg"));
  EXPECT_EQ(write_model(ground(pfg)), write_model(ground(pfg)));
}

TEST(ParametricModel, ValidationErrors) {
  const Prv r{"R", {"X"}, kBool, "R.{X}"};
  const LogicalVariable x{"X", {"a", "b"}};
  EXPECT_THROW(ParametricFactorGraph({x}, {r}, {{"g", {"R"}, {"c", {}, std::nullopt}, {1, 1}}}), MalformedModel);
  EXPECT_THROW(ParametricFactorGraph({x}, {{"R", {"X"}, kBool, "R"}}, {{"g", {"R"}, {"c", {"X"}, std::nullopt}, {1, 1}}}),
               MalformedModel);
  EXPECT_THROW(ParametricFactorGraph({x}, {r}, {{"g", {"S"}, {"c", {"X"}, std::nullopt}, {1, 1}}}), MalformedModel);
  EXPECT_THROW(ParametricFactorGraph({{"X", {}}}, {r}, {{"g", {"R"}, {"c", {"X"}, std::nullopt}, {1, 1}}}), MalformedModel);
  EXPECT_THROW(ParametricFactorGraph({x}, {r}, {}), MalformedModel);
  EXPECT_NO_THROW(ParametricFactorGraph({x}, {r}, {{"g", {"R"}, {"c", {"X"}, std::nullopt}, {1, 1}}}));
}

TEST(ParametricModel, DisplayAndGroundName) {
  const Prv treat{"Treat", {"P", "M"}, kBool, default_pattern("Treat", {"P", "M"})};
  EXPECT_EQ(treat.pattern, "Treat.{P}.{M}");
  EXPECT_EQ(treat.display(), "Treat(P,M)");
  EXPECT_EQ(treat.ground_name({{"P", "alice"}, {"M", "m1"}}), "Treat.alice.m1");
  EXPECT_EQ(default_pattern("Epid", {}), "Epid");
}
