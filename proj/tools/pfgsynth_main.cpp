#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfgsynth/error.hpp"
#include "pfgsynth/model_io.hpp"
#include "pfgsynth/pipeline.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_double(const std::string& text, const std::string& flag) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw UsageError(flag + ": not a number: '" + text + "'");
  return value;
}

} // namespace

int main(int argc, char** argv) {
  using namespace pfgsynth;

  CLI::App app{"Learn a factor graph from a relational database, lift it and sample synthetic tables."};
  app.set_config("--config", "", "Read options from a TOML/INI file; command-line flags take precedence");
  app.require_subcommand(1);

  LearnConfig lc;
  std::vector<std::string> k_items;
  std::string smooth_text;
  std::string clusters_in, skeleton_in;
  auto* learn = app.add_subcommand("learn", "Learn a factor graph (model.fg, clusters.csv, skeleton.txt)");
  learn->add_option("--schema", lc.schema, "Schema JSON file")->required();
  learn->add_option("--data", lc.data, "Directory with one CSV per class")->required();
  auto* k_opt = learn->add_option("--k", k_items, "Clusters per entity class, as Class=k (default 2)");
  auto* cf_opt = learn->add_option("--clusters-file", clusters_in, "Fixed clusters CSV (entity_class,key,cluster)");
  k_opt->excludes(cf_opt);
  learn->add_option("--skeleton", skeleton_in, "Use this skeleton instead of CI testing");
  learn->add_option("--alpha", lc.alpha, "CI test significance level")->capture_default_str();
  learn->add_option("--max-cond", lc.max_condition, "Largest conditioning set")->capture_default_str();
  auto* smooth_opt = learn->add_option("--smooth", smooth_text, "Add delta to every potential (0.5 if no value)")->expected(0, 1);
  learn->add_option("--seed", lc.seed, "Clustering seed")->capture_default_str();
  learn->add_option("--out", lc.out, "Output directory")->required();

  LiftConfig fc;
  auto* lift = app.add_subcommand("lift", "Lift a factor graph to a parametric factor graph");
  lift->add_option("model", fc.model, "Factor graph model file")->required();
  lift->add_option("--epsilon", fc.epsilon, "Relative potential tolerance for grouping")->capture_default_str();
  lift->add_option("--out", fc.out, "Output model file")->required();
  std::string trace_out;
  lift->add_option("--trace", trace_out, "Write the per-round colouring trace (CSV)");

  SampleConfig sc;
  std::string method = "exact";
  std::vector<std::string> rows_items;
  auto* sample = app.add_subcommand("sample", "Sample a model and write synthetic CSVs");
  sample->add_option("model", sc.model, "Model file (factor graph or parametric)")->required();
  sample->add_option("--schema", sc.schema, "Schema JSON file")->required();
  sample->add_option("--clusters-file", sc.clusters_file, "Clusters CSV written by learn")->required();
  sample->add_option("--method", method, "exact or gibbs")->capture_default_str();
  sample->add_option("--n", sc.n, "Number of joint samples")->capture_default_str();
  sample->add_option("--burn-in", sc.burn_in, "Gibbs sweeps discarded first")->capture_default_str();
  sample->add_option("--thin", sc.thin, "Gibbs sweeps per kept sample")->capture_default_str();
  sample->add_option("--seed", sc.seed, "Sampler seed")->capture_default_str();
  sample->add_option("--rows-per-cluster", rows_items, "Entities per cluster and sample: cluster=n, or original");
  sample->add_option("--out", sc.out, "Output directory")->required();

  std::string inspect_model;
  auto* inspect = app.add_subcommand("inspect", "Print a model in readable form");
  inspect->add_option("model", inspect_model, "Model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (learn->parsed()) {
      for (const auto& item : k_items) lc.k.insert(parse_assignment(item));
      if (!clusters_in.empty()) lc.clusters_file = clusters_in;
      if (!skeleton_in.empty()) lc.skeleton_file = skeleton_in;
      if (smooth_opt->count() > 0) {
        lc.smoothing = smooth_text.empty() ? kDefaultSmoothing : parse_double(smooth_text, "--smooth");
        if (!(*lc.smoothing >= 0.0)) throw UsageError("--smooth must be >= 0");
      }
      if (!(lc.alpha > 0.0 && lc.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
      run_learn(lc, std::cout);
    } else if (lift->parsed()) {
      if (!(fc.epsilon >= 0.0)) throw UsageError("--epsilon must be >= 0");
      if (!trace_out.empty()) fc.trace = trace_out;
      run_lift(fc, std::cout);
    } else if (sample->parsed()) {
      if (method != "exact" && method != "gibbs") throw UsageError("--method must be exact or gibbs");
      sc.method = parse_sampler_method(method);
      if (sc.thin == 0) throw UsageError("--thin must be at least 1");
      for (const auto& item : rows_items) {
        if (item == "original") sc.rows.original = true;
        else sc.rows.counts.insert(parse_assignment(item));
      }
      run_sample(sc, std::cout);
    } else if (inspect->parsed()) {
      std::cout << inspect_report(load_model(inspect_model));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ParamError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "error in " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
