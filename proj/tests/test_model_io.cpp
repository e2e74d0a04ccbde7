#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>

#include "pfgsynth/error.hpp"
#include "pfgsynth/model_io.hpp"
#include "support.hpp"

using namespace pfgsynth;

namespace {

const Range kBool{"true", "false"};

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_model(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

FactorGraph with_irrational_tables(const FactorGraph& fg, Rng& rng) {
  auto specs = fg.factor_specs();
  for (auto& s : specs) {
    for (auto& x : s.table) x = x * (1.0 + rng.uniform()) / 7.0;
  }
  return FactorGraph(fg.variables(), specs);
}

} // namespace

TEST(ModelIo, PotentialsRoundTripBitExact) {
  Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    double x = 0.0;
    switch (i % 4) {
      case 0: x = rng.uniform(); break;
      case 1: x = rng.uniform() * 1e12; break;
      case 2: x = std::ldexp(rng.uniform(), -1060); break;
      default: x = static_cast<double>(rng.below(1000)) / 3.0;
    }
    const auto text = format_potential(x);
    double back = -1.0;
    std::from_chars(text.data(), text.data() + text.size(), back);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back), std::bit_cast<std::uint64_t>(x)) << text;
  }
  EXPECT_EQ(format_potential(5.0), "5");
  EXPECT_EQ(format_potential(10.5), "10.5");
  EXPECT_EQ(format_potential(0.1), "0.1");
}

TEST(ModelIo, RandomFactorGraphsRoundTrip) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto fg = with_irrational_tables(support::random_factor_graph(rng), rng);
    const auto text = write_model(fg);
    const auto back = parse_model(text);
    ASSERT_TRUE(std::holds_alternative<FactorGraph>(back));
    const auto& parsed = std::get<FactorGraph>(back);
    EXPECT_EQ(write_model(parsed), text);
    ASSERT_EQ(parsed.factor_count(), fg.factor_count());
    for (std::size_t f = 0; f < fg.factor_count(); ++f) {
      EXPECT_EQ(parsed.factors()[f].table, fg.factors()[f].table);
      EXPECT_EQ(parsed.factors()[f].args, fg.factors()[f].args);
    }
  }
}

TEST(ModelIo, ParametricRoundTrip) {
  const auto text = read_text(support::test_data("epidemic.pfg"));
  const auto pfg = std::get<ParametricFactorGraph>(parse_model(text));
  const auto written = write_model(pfg);
  EXPECT_EQ(write_model(std::get<ParametricFactorGraph>(parse_model(written))), written);
  EXPECT_TRUE(factor_multiset_equal(ground(std::get<ParametricFactorGraph>(parse_model(written))), ground(pfg)));
}

TEST(ModelIo, ExplicitConstraintRoundTrip) {
  const ParametricFactorGraph pfg(
      {{"P", {"p1", "p2"}}, {"M", {"m1", "m2"}}}, {{"T", {"P", "M"}, kBool, "T.{P}.{M}"}},
      {{"g", {"T"}, {"c", {"P", "M"}, std::vector<std::vector<std::string>>{{"p1", "m1"}, {"p2", "m2"}}}, {1, 2}}});
  const auto text = write_model(pfg);
  const auto back = std::get<ParametricFactorGraph>(parse_model(text));
  ASSERT_FALSE(back.parfactors()[0].constraint.is_top());
  EXPECT_EQ(back.parfactors()[0].constraint.tuples->size(), 2u);
  EXPECT_EQ(write_model(back), text);
}

TEST(ModelIo, QuotedTokens) {
  const FactorGraph fg({{"A", {"<18", ">=18"}}, {"B", {"#x", "two words"}}, {"C", {"say \"hi\"", "back\\slash"}}},
                       {{"phi", {"A", "B", "C"}, {1, 2, 3, 4, 5, 6, 7, 8}}});
  const auto text = write_model(fg);
  EXPECT_NE(text.find("\"#x\""), std::string::npos);
  EXPECT_NE(text.find("\"two words\""), std::string::npos);
  const auto back = std::get<FactorGraph>(parse_model(text));
  EXPECT_EQ(back.variable("B").range, (Range{"#x", "two words"}));
  EXPECT_EQ(back.variable("C").range, (Range{"say \"hi\"", "back\\slash"}));
  EXPECT_EQ(tokenize("a \"b c\" d", 1), (std::vector<std::string>{"a", "b c", "d"}));
}

TEST(ModelIo, CommentsAndBlankLinesIgnored) {
  const auto fg = load_factor_graph(support::test_data("shared_table.fg"));
  EXPECT_EQ(fg.variable_count(), 3u);
  EXPECT_EQ(fg.factor_count(), 2u);
}

TEST(ModelIo, TruncatedFileReportsLine) {
  const auto text = read_text(support::test_data("shared_table.fg"));
  // Cut inside phi2's table: the last complete line is "row true false 2".
  const auto cut = text.find("row false true 3", text.find("factor phi2"));
  ASSERT_NE(cut, std::string::npos);
  const auto truncated = text.substr(0, cut);
  // End of input is reported on the unfinished line after the last newline.
  const auto lines = static_cast<std::size_t>(std::count(truncated.begin(), truncated.end(), '\n'));
  EXPECT_EQ(parse_error_line(truncated), lines + 1);
}

TEST(ModelIo, ParseErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line(""), 1u);
  EXPECT_EQ(parse_error_line("pfgsynth-model 2 fg\n"), 1u);
  EXPECT_EQ(parse_error_line("pfgsynth-model 1 fg\nrv A range true false\nfactor f\n  args A\n  row true x\n  row false 1\nend\n"), 5u);
  EXPECT_EQ(parse_error_line("pfgsynth-model 1 fg\nrv A range true false\nfactor f\n  args A\n  row false 1\n  row true 1\nend\n"), 5u);
  EXPECT_EQ(parse_error_line("pfgsynth-model 1 fg\nrv A range true false\nfactor f\n  args B\nend\n"), 4u);
  EXPECT_EQ(parse_error_line("pfgsynth-model 1 fg\nrv A range true false\nbogus\n"), 3u);
  EXPECT_EQ(parse_error_line("pfgsynth-model 1 fg\nrv A range \"open\n"), 2u);
}

TEST(ModelIo, InvariantViolationsAreMalformed) {
  // Parses, but variable B is in no factor.
  const std::string text =
      "pfgsynth-model 1 fg\nrv A range true false\nrv B range true false\nfactor f\n  args A\n  row true 1\n  row false 1\nend\n";
  EXPECT_THROW(parse_model(text), MalformedModel);
}

TEST(ModelIo, LoadKindChecks) {
  EXPECT_THROW(load_factor_graph(support::test_data("epidemic.pfg")), Error);
  EXPECT_NO_THROW(load_parametric(support::test_data("shared_table.fg")));
  EXPECT_THROW(load_model(support::test_data("missing.fg")), Error);
}
