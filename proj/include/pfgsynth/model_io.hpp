#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pfgsynth/model.hpp"

namespace pfgsynth {

// Line-oriented model text format. See docs/model-format.md.
//
//   pfgsynth-model 1 fg|pfg
//   rv <name> range <v>...
//   factor <name> / args <rv>... / row <v>... <potential> / end
//   lv <name> domain <c>...
//   prv <name> / lvs <lv>... / range <v>... / pattern <p> / end
//   constraint <name> / lvs <lv>... / top | tuple <c>... / end
//   parfactor <name> / args <prv>... / constraint <name> / row ... / end
//
// Tokens are whitespace separated; tokens containing whitespace, quotes, a
// backslash or a leading '#' are double-quoted. Potentials use the shortest
// decimal form that round-trips exactly.

using Model = std::variant<FactorGraph, ParametricFactorGraph>;

std::string write_model(const FactorGraph& fg);
std::string write_model(const ParametricFactorGraph& pfg);

/// Throws ParseError (with line number) on syntax errors and MalformedModel
/// when the parsed model violates an invariant.
Model parse_model(std::string_view text);

Model load_model(const std::filesystem::path& path);
FactorGraph load_factor_graph(const std::filesystem::path& path);
/// Accepts both kinds; a factor graph is wrapped with as_parametric().
ParametricFactorGraph load_parametric(const std::filesystem::path& path);

void save_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Formats a potential in shortest round-trip form.
std::string format_potential(double value);

/// Splits a line into tokens honouring double quotes.
std::vector<std::string> tokenize(std::string_view line, std::size_t line_number);
std::string quote_token(std::string_view token);

} // namespace pfgsynth
