#include "pfgsynth/pipeline.hpp"

#include <charconv>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pfgsynth/acp.hpp"

namespace pfgsynth {

namespace {

template <class F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(name, e.what());
  }
}

std::string table_rows(const std::vector<Range>& ranges, const PotentialTable& table) {
  std::vector<std::size_t> cards;
  for (const auto& r : ranges) cards.push_back(r.size());
  std::ostringstream out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto values = decode_index(i, cards);
    out << "    ";
    for (std::size_t a = 0; a < values.size(); ++a) out << ranges[a][values[a]] << ' ';
    out << "| " << format_potential(table[i]) << '\n';
  }
  return out.str();
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

} // namespace

std::pair<std::string, std::size_t> parse_assignment(const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
    throw ParamError("expected name=count, got '" + item + "'");
  }
  std::size_t value = 0;
  const auto* first = item.data() + eq + 1;
  const auto* last = item.data() + item.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw ParamError("expected a nonnegative integer in '" + item + "'");
  return {item.substr(0, eq), value};
}

FactorGraph run_learn(const LearnConfig& config, std::ostream& log) {
  auto [schema, inst] = stage("ingest", [&] { return load_instance(config.schema, config.data); });
  const auto join = stage("join", [&] { return augmented_full_join(schema, inst); });
  const auto clusters = stage("cluster", [&] {
    if (config.clusters_file) return load_clusters(*config.clusters_file, schema, &inst);
    return cluster_entities(schema, inst, config.k, config.seed);
  });
  const auto skeleton = stage("structure", [&] {
    const auto columns = learnable_columns(join);
    if (config.skeleton_file) return parse_skeleton(read_text(*config.skeleton_file), columns);
    return learn_skeleton(join, columns, config.alpha, config.max_condition);
  });
  auto fg = stage("potentials", [&] {
    return learn_potentials(join, schema, inst, clusters, instantiate_factors(schema, skeleton, clusters), config.smoothing);
  });
  stage("write", [&] {
    save_text(config.out / "model.fg", write_model(fg));
    write_clusters(config.out / "clusters.csv", clusters);
    save_text(config.out / "skeleton.txt", write_skeleton(skeleton));
  });

  log << "join rows: " << join.row_count() << '\n';
  for (const auto& ec : clusters.classes()) {
    log << "clusters " << ec.entity << ":";
    for (std::size_t c = 0; c < ec.size(); ++c) log << ' ' << ec.labels[c] << "={" << join_list(ec.members[c]) << '}';
    log << '\n';
  }
  log << "skeleton edges:";
  if (skeleton.edges.empty()) log << " none";
  for (auto [a, b] : skeleton.edges) log << ' ' << skeleton.nodes[a] << '-' << skeleton.nodes[b];
  log << '\n';
  log << "random variables: " << fg.variable_count() << '\n';
  log << "factors: " << fg.factor_count() << '\n';
  log << "wrote " << (config.out / "model.fg").string() << '\n';
  return fg;
}

ParametricFactorGraph run_lift(const LiftConfig& config, std::ostream& log) {
  const auto fg = stage("load", [&] { return load_factor_graph(config.model); });
  auto lifted = stage("lift", [&] { return run_colour_passing(fg, {}, config.epsilon); });
  auto pfg = stage("lift", [&] { return construct_pfg(lifted.grouped, lifted.colouring); });
  stage("write", [&] {
    save_text(config.out, write_model(pfg));
    if (config.trace) save_text(*config.trace, write_trace(lifted.trace));
  });
  for (const auto& n : lifted.notices) log << "notice: " << n << '\n';
  log << "colour passing rounds: " << lifted.colouring.round << '\n';
  log << "parfactors: " << pfg.parfactors().size() << " (from " << fg.factor_count() << " factors)\n";
  for (const auto& lv : pfg.lvs()) log << "dom(" << lv.name << ") = {" << join_list(lv.domain) << "}\n";
  log << "wrote " << config.out.string() << '\n';
  return pfg;
}

SampleBatch run_sample(const SampleConfig& config, std::ostream& log) {
  const auto text = stage("load", [&] { return read_text(config.model); });
  const auto pfg = stage("load", [&] {
    auto model = parse_model(text);
    if (auto* fg = std::get_if<FactorGraph>(&model)) return as_parametric(*fg);
    return std::get<ParametricFactorGraph>(std::move(model));
  });
  const auto schema = stage("load", [&] { return load_schema(config.schema); });
  const auto clusters = stage("load", [&] { return load_clusters(config.clusters_file, schema); });
  const auto fg = stage("ground", [&] { return ground(pfg); });
  auto batch = stage("sample", [&] {
    if (config.method == SamplerMethod::Exact) return sample_exact(fg, config.n, config.seed);
    return sample_gibbs(fg, config.n, config.seed, config.burn_in, config.thin);
  });
  stage("materialize", [&] {
    const auto inst = materialize(schema, clusters, fg, batch, config.rows);
    write_instance(schema, inst, config.out);

    nlohmann::ordered_json manifest;
    manifest["method"] = to_string(config.method);
    manifest["n"] = config.n;
    manifest["seed"] = config.seed;
    if (config.method == SamplerMethod::Gibbs) {
      manifest["burn_in"] = config.burn_in;
      manifest["thin"] = config.thin;
    }
    if (config.rows.original) manifest["rows_per_cluster"] = "original";
    else manifest["rows_per_cluster"] = "1";
    if (!config.rows.counts.empty()) manifest["rows_per_cluster_overrides"] = config.rows.counts;
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(text);
    manifest["model_fnv1a64"] = hash.str();
    manifest["ground_variables"] = fg.variable_count();
    manifest["ground_factors"] = fg.factor_count();
    for (std::size_t e = 0; e < schema.entities().size(); ++e) {
      manifest["rows"][schema.entities()[e].name] = inst.entities[e].size();
    }
    for (std::size_t r = 0; r < schema.relationships().size(); ++r) {
      manifest["rows"][schema.relationships()[r].name] = inst.relationships[r].size();
    }
    save_text(config.out / "manifest.json", manifest.dump(2) + "\n");
    log << "samples: " << batch.samples.size() << " (" << to_string(config.method) << ")\n";
    for (const auto& [name, count] : manifest["rows"].items()) log << name << " rows: " << count.get<std::size_t>() << '\n';
  });
  log << "wrote " << config.out.string() << '\n';
  return batch;
}

std::string inspect_report(const Model& model) {
  std::ostringstream out;
  if (const auto* fg = std::get_if<FactorGraph>(&model)) {
    out << "factor graph: " << fg->variable_count() << " random variables, " << fg->factor_count() << " factors\n";
    out << "random variables:\n";
    for (const auto& v : fg->variables()) out << "  " << v.name << " {" << join_list(v.range) << "}\n";
    out << "factors:\n";
    for (const auto& f : fg->factors()) {
      std::vector<std::string> args;
      std::vector<Range> ranges;
      for (auto a : f.args) {
        args.push_back(fg->variables()[a].name);
        ranges.push_back(fg->variables()[a].range);
      }
      out << "  " << f.name << "(" << join_list(args) << ")\n" << table_rows(ranges, f.table);
    }
    return out.str();
  }
  const auto& pfg = std::get<ParametricFactorGraph>(model);
  out << "parametric factor graph: " << pfg.lvs().size() << " logical variables, " << pfg.prvs().size() << " PRVs, "
      << pfg.parfactors().size() << " parfactors\n";
  out << "logical variables:\n";
  for (const auto& lv : pfg.lvs()) out << "  dom(" << lv.name << ") = {" << join_list(lv.domain) << "}\n";
  out << "PRVs:\n";
  for (const auto& p : pfg.prvs()) out << "  " << p.display() << " {" << join_list(p.range) << "} grounds as " << p.pattern << '\n';
  out << "parfactors:\n";
  for (const auto& g : pfg.parfactors()) {
    std::vector<std::string> args;
    std::vector<Range> ranges;
    for (const auto& a : g.args) {
      args.push_back(pfg.prv(a).display());
      ranges.push_back(pfg.prv(a).range);
    }
    out << "  " << g.name << "(" << join_list(args) << ")";
    if (g.constraint.lvs.empty()) {
      out << '\n';
    } else if (g.constraint.is_top()) {
      out << " | (" << join_list(g.constraint.lvs) << ") TOP\n";
    } else {
      out << " | (" << join_list(g.constraint.lvs) << ") in {";
      const auto& tuples = *g.constraint.tuples;
      for (std::size_t t = 0; t < tuples.size(); ++t) out << (t ? ", " : "") << "(" << join_list(tuples[t]) << ")";
      out << "}\n";
    }
    out << table_rows(ranges, g.table);
    out << "    groundings: " << pfg.groundings(g).size() << '\n';
  }
  return out.str();
}

} // namespace pfgsynth
