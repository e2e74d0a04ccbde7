#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "pfgsynth/error.hpp"
#include "pfgsynth/learn.hpp"
#include "pfgsynth/model_io.hpp"
#include "pfgsynth/sampler.hpp"

namespace pfgsynth {

struct LearnConfig {
  std::filesystem::path schema;
  std::filesystem::path data;
  std::map<std::string, std::size_t> k;
  std::optional<std::filesystem::path> clusters_file;
  std::optional<std::filesystem::path> skeleton_file;
  double alpha = kDefaultAlpha;
  std::size_t max_condition = kDefaultMaxCondition;
  std::optional<double> smoothing;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct LiftConfig {
  std::filesystem::path model;
  double epsilon = 0.0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> trace;
};

struct SampleConfig {
  std::filesystem::path model;
  std::filesystem::path schema;
  std::filesystem::path clusters_file;
  SamplerMethod method = SamplerMethod::Exact;
  std::size_t n = 1;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  RowsPerCluster rows;
  std::filesystem::path out;
};

/// Failure of one pipeline stage; the message names the stage.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

/// Writes `model.fg`, `clusters.csv` and `skeleton.txt` into `out` and prints
/// a summary. Returns the learned graph.
FactorGraph run_learn(const LearnConfig& config, std::ostream& log);

ParametricFactorGraph run_lift(const LiftConfig& config, std::ostream& log);

/// Writes one CSV per schema class and `manifest.json` into `out`.
SampleBatch run_sample(const SampleConfig& config, std::ostream& log);

std::string inspect_report(const Model& model);

/// Parses `name=count` items; throws ParamError.
std::pair<std::string, std::size_t> parse_assignment(const std::string& item);

} // namespace pfgsynth
