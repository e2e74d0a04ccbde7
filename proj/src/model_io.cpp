#include "pfgsynth/model_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "pfgsynth/error.hpp"

namespace pfgsynth {

namespace {

constexpr std::string_view kMagic = "pfgsynth-model";

void write_line(std::ostringstream& out, std::string_view indent, std::string_view keyword,
                const std::vector<std::string>& tokens) {
  out << indent << keyword;
  for (const auto& t : tokens) out << ' ' << quote_token(t);
  out << '\n';
}

void write_rows(std::ostringstream& out, const std::vector<const Range*>& ranges, const PotentialTable& table) {
  std::vector<std::size_t> cards;
  for (auto* r : ranges) cards.push_back(r->size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto values = decode_index(i, cards);
    std::vector<std::string> tokens;
    for (std::size_t a = 0; a < values.size(); ++a) tokens.push_back((*ranges[a])[values[a]]);
    tokens.push_back(format_potential(table[i]));
    write_line(out, "  ", "row", tokens);
  }
}

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

class Reader {
public:
  explicit Reader(std::string_view text) {
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      ++number;
      auto line = text.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      auto tokens = tokenize(line, number);
      if (!tokens.empty()) lines_.push_back({number, std::move(tokens)});
      last_line_ = number;
      pos = nl + 1;
    }
  }

  bool done() const { return next_ >= lines_.size(); }
  const Line& peek() const { return lines_[next_]; }
  const Line& take() {
    if (done()) throw ParseError(last_line_, "unexpected end of file");
    return lines_[next_++];
  }
  std::size_t last_line() const { return last_line_; }

private:
  std::vector<Line> lines_;
  std::size_t next_ = 0;
  std::size_t last_line_ = 0;
};

void expect_arity(const Line& l, std::size_t min_tokens, const std::string& what) {
  if (l.tokens.size() < min_tokens) throw ParseError(l.number, "malformed '" + l.tokens[0] + "' line: " + what);
}

std::vector<std::string> tail(const Line& l, std::size_t from) {
  return {l.tokens.begin() + static_cast<std::ptrdiff_t>(from), l.tokens.end()};
}

double parse_potential(const std::string& token, std::size_t line) {
  double v = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(line, "invalid potential '" + token + "'");
  return v;
}

// Reads `row` lines until `end`; verifies mixed-radix order.
PotentialTable read_rows(Reader& r, const std::vector<const Range*>& ranges) {
  std::vector<std::size_t> cards;
  for (auto* rg : ranges) cards.push_back(rg->size());
  const std::size_t expected = table_size(cards);
  PotentialTable table;
  while (true) {
    const auto& l = r.take();
    if (l.tokens[0] == "end") break;
    if (l.tokens[0] != "row") throw ParseError(l.number, "expected 'row' or 'end', found '" + l.tokens[0] + "'");
    if (l.tokens.size() != ranges.size() + 2)
      throw ParseError(l.number, "row needs " + std::to_string(ranges.size()) + " values and a potential");
    if (table.size() >= expected) throw ParseError(l.number, "too many table rows");
    const auto values = decode_index(table.size(), cards);
    for (std::size_t a = 0; a < ranges.size(); ++a) {
      if (l.tokens[a + 1] != (*ranges[a])[values[a]]) {
        throw ParseError(l.number, "row out of order: expected value '" + (*ranges[a])[values[a]] + "', found '" +
                                       l.tokens[a + 1] + "'");
      }
    }
    table.push_back(parse_potential(l.tokens.back(), l.number));
  }
  if (table.size() != expected) {
    throw ParseError(r.last_line(), "table has " + std::to_string(table.size()) + " rows, expected " +
                                        std::to_string(expected));
  }
  return table;
}

FactorGraph parse_fg(Reader& r) {
  std::vector<RandomVariable> variables;
  std::map<std::string, std::size_t> index;
  std::vector<FactorSpec> factors;
  while (!r.done()) {
    const auto& l = r.take();
    const auto& kw = l.tokens[0];
    if (kw == "rv") {
      expect_arity(l, 3, "rv <name> range <values>...");
      if (l.tokens[2] != "range") throw ParseError(l.number, "expected 'range' after variable name");
      if (!index.emplace(l.tokens[1], variables.size()).second)
        throw ParseError(l.number, "duplicate variable '" + l.tokens[1] + "'");
      variables.push_back({l.tokens[1], tail(l, 3)});
    } else if (kw == "factor") {
      expect_arity(l, 2, "factor <name>");
      FactorSpec f{l.tokens[1], {}, {}};
      const auto& args = r.take();
      if (args.tokens[0] != "args") throw ParseError(args.number, "expected 'args'");
      f.args = tail(args, 1);
      std::vector<const Range*> ranges;
      for (const auto& a : f.args) {
        auto it = index.find(a);
        if (it == index.end()) throw ParseError(args.number, "undeclared variable '" + a + "'");
        ranges.push_back(&variables[it->second].range);
      }
      f.table = read_rows(r, ranges);
      factors.push_back(std::move(f));
    } else {
      throw ParseError(l.number, "unknown record '" + kw + "' in fg model");
    }
  }
  return FactorGraph(std::move(variables), std::move(factors));
}

ParametricFactorGraph parse_pfg(Reader& r) {
  std::vector<LogicalVariable> lvs;
  std::vector<Prv> prvs;
  std::map<std::string, std::size_t> prv_index;
  std::map<std::string, Constraint> constraints;
  std::vector<Parfactor> parfactors;
  while (!r.done()) {
    const auto& l = r.take();
    const auto& kw = l.tokens[0];
    if (kw == "lv") {
      expect_arity(l, 3, "lv <name> domain <constants>...");
      if (l.tokens[2] != "domain") throw ParseError(l.number, "expected 'domain' after logical variable name");
      lvs.push_back({l.tokens[1], tail(l, 3)});
    } else if (kw == "prv") {
      expect_arity(l, 2, "prv <name>");
      Prv p{l.tokens[1], {}, {}, {}};
      bool has_pattern = false;
      while (true) {
        const auto& b = r.take();
        if (b.tokens[0] == "end") break;
        if (b.tokens[0] == "lvs") {
          p.lvs = tail(b, 1);
        } else if (b.tokens[0] == "range") {
          p.range = tail(b, 1);
        } else if (b.tokens[0] == "pattern") {
          if (b.tokens.size() != 2) throw ParseError(b.number, "pattern takes one token");
          p.pattern = b.tokens[1];
          has_pattern = true;
        } else {
          throw ParseError(b.number, "unknown prv field '" + b.tokens[0] + "'");
        }
      }
      if (!has_pattern) p.pattern = default_pattern(p.name, p.lvs);
      if (!prv_index.emplace(p.name, prvs.size()).second)
        throw ParseError(l.number, "duplicate PRV '" + p.name + "'");
      prvs.push_back(std::move(p));
    } else if (kw == "constraint") {
      expect_arity(l, 2, "constraint <name>");
      Constraint c{l.tokens[1], {}, std::nullopt};
      bool top = false;
      std::vector<std::vector<std::string>> tuples;
      while (true) {
        const auto& b = r.take();
        if (b.tokens[0] == "end") break;
        if (b.tokens[0] == "lvs") {
          c.lvs = tail(b, 1);
        } else if (b.tokens[0] == "top") {
          top = true;
        } else if (b.tokens[0] == "tuple") {
          tuples.push_back(tail(b, 1));
        } else {
          throw ParseError(b.number, "unknown constraint field '" + b.tokens[0] + "'");
        }
      }
      if (top == !tuples.empty()) throw ParseError(l.number, "constraint needs either 'top' or at least one 'tuple'");
      if (!top) c.tuples = std::move(tuples);
      if (!constraints.emplace(c.name, c).second) throw ParseError(l.number, "duplicate constraint '" + c.name + "'");
    } else if (kw == "parfactor") {
      expect_arity(l, 2, "parfactor <name>");
      Parfactor g{l.tokens[1], {}, {}, {}};
      const auto& args = r.take();
      if (args.tokens[0] != "args") throw ParseError(args.number, "expected 'args'");
      g.args = tail(args, 1);
      const auto& cl = r.take();
      if (cl.tokens[0] != "constraint" || cl.tokens.size() != 2) throw ParseError(cl.number, "expected 'constraint <name>'");
      auto cit = constraints.find(cl.tokens[1]);
      if (cit == constraints.end()) throw ParseError(cl.number, "undeclared constraint '" + cl.tokens[1] + "'");
      g.constraint = cit->second;
      std::vector<const Range*> ranges;
      for (const auto& a : g.args) {
        auto it = prv_index.find(a);
        if (it == prv_index.end()) throw ParseError(args.number, "undeclared PRV '" + a + "'");
        ranges.push_back(&prvs[it->second].range);
      }
      g.table = read_rows(r, ranges);
      parfactors.push_back(std::move(g));
    } else {
      throw ParseError(l.number, "unknown record '" + kw + "' in pfg model");
    }
  }
  return ParametricFactorGraph(std::move(lvs), std::move(prvs), std::move(parfactors));
}

} // namespace

std::string format_potential(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw MalformedModel("cannot format potential");
  return std::string(buf, ptr);
}

std::string quote_token(std::string_view token) {
  bool needs = token.empty() || token.front() == '#';
  for (char c : token) {
    if (c == '"' || c == '\\' || c == ' ' || c == '\t' || c == '\n' || c == '\r') needs = true;
  }
  if (!needs) return std::string(token);
  std::string out = "\"";
  for (char c : token) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

std::vector<std::string> tokenize(std::string_view line, std::size_t line_number) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    if (line[i] == '#') break; // comment
    std::string token;
    if (line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char c = line[i++];
        if (c == '"') {
          closed = true;
          break;
        }
        if (c == '\\') {
          if (i >= line.size()) throw ParseError(line_number, "dangling escape");
          c = line[i++];
          if (c == 'n') c = '\n';
        }
        token.push_back(c);
      }
      if (!closed) throw ParseError(line_number, "unterminated quoted token");
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') token.push_back(line[i++]);
    }
    tokens.push_back(std::move(token));
  }
  return tokens;
}

std::string write_model(const FactorGraph& fg) {
  std::ostringstream out;
  out << kMagic << " 1 fg\n";
  for (const auto& v : fg.variables()) {
    out << "rv " << quote_token(v.name) << " range";
    for (const auto& val : v.range) out << ' ' << quote_token(val);
    out << '\n';
  }
  for (const auto& f : fg.factors()) {
    out << "factor " << quote_token(f.name) << '\n';
    std::vector<std::string> args;
    std::vector<const Range*> ranges;
    for (auto a : f.args) {
      args.push_back(fg.variables()[a].name);
      ranges.push_back(&fg.variables()[a].range);
    }
    write_line(out, "  ", "args", args);
    write_rows(out, ranges, f.table);
    out << "end\n";
  }
  return out.str();
}

std::string write_model(const ParametricFactorGraph& pfg) {
  std::ostringstream out;
  out << kMagic << " 1 pfg\n";
  for (const auto& l : pfg.lvs()) {
    out << "lv " << quote_token(l.name) << " domain";
    for (const auto& c : l.domain) out << ' ' << quote_token(c);
    out << '\n';
  }
  for (const auto& p : pfg.prvs()) {
    out << "prv " << quote_token(p.name) << '\n';
    if (!p.lvs.empty()) write_line(out, "  ", "lvs", p.lvs);
    write_line(out, "  ", "range", p.range);
    write_line(out, "  ", "pattern", {p.pattern});
    out << "end\n";
  }
  // Constraint names are not required to be unique across parfactors in
  // memory; emit one record per parfactor under a derived unique name.
  std::vector<std::string> cnames;
  for (const auto& g : pfg.parfactors()) {
    const std::string cname = "c." + g.name;
    cnames.push_back(cname);
    out << "constraint " << quote_token(cname) << '\n';
    if (!g.constraint.lvs.empty()) write_line(out, "  ", "lvs", g.constraint.lvs);
    if (g.constraint.is_top()) {
      out << "  top\n";
    } else {
      for (const auto& t : *g.constraint.tuples) write_line(out, "  ", "tuple", t);
    }
    out << "end\n";
  }
  for (std::size_t i = 0; i < pfg.parfactors().size(); ++i) {
    const auto& g = pfg.parfactors()[i];
    out << "parfactor " << quote_token(g.name) << '\n';
    write_line(out, "  ", "args", g.args);
    write_line(out, "  ", "constraint", {cnames[i]});
    std::vector<const Range*> ranges;
    for (const auto& a : g.args) ranges.push_back(&pfg.prv(a).range);
    write_rows(out, ranges, g.table);
    out << "end\n";
  }
  return out.str();
}

Model parse_model(std::string_view text) {
  Reader r(text);
  if (r.done()) throw ParseError(1, "empty model file");
  const auto& header = r.take();
  if (header.tokens.size() != 3 || header.tokens[0] != kMagic || header.tokens[1] != "1")
    throw ParseError(header.number, "expected header 'pfgsynth-model 1 fg|pfg'");
  if (header.tokens[2] == "fg") return parse_fg(r);
  if (header.tokens[2] == "pfg") return parse_pfg(r);
  throw ParseError(header.number, "unknown model kind '" + header.tokens[2] + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(path.string() + ": cannot write file");
  out << text;
  if (!out) throw LoadError(path.string() + ": write failed");
}

Model load_model(const std::filesystem::path& path) {
  const auto text = read_text(path);
  try {
    return parse_model(text);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
  }
}

FactorGraph load_factor_graph(const std::filesystem::path& path) {
  auto m = load_model(path);
  if (auto* fg = std::get_if<FactorGraph>(&m)) return std::move(*fg);
  throw MalformedModel(path.string() + ": expected a factor graph (fg) model");
}

ParametricFactorGraph load_parametric(const std::filesystem::path& path) {
  auto m = load_model(path);
  if (auto* fg = std::get_if<FactorGraph>(&m)) return as_parametric(*fg);
  return std::get<ParametricFactorGraph>(std::move(m));
}

} // namespace pfgsynth
