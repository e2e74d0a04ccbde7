#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pfgsynth/clustering.hpp"
#include "pfgsynth/model.hpp"
#include "pfgsynth/schema.hpp"

namespace pfgsynth {

enum class SamplerMethod { Exact, Gibbs };

std::string to_string(SamplerMethod method);
SamplerMethod parse_sampler_method(const std::string& text); // throws ParamError

/// Joint samples over the variables of one factor graph, each a value index
/// per variable in fg.variables() order.
struct SampleBatch {
  std::vector<std::string> variables;
  std::vector<std::vector<ValueIndex>> samples;
  std::uint64_t seed = 0;
  SamplerMethod method = SamplerMethod::Exact;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
};

/// Independent draws by inverse CDF over the enumerated joint. Throws
/// TooLarge above the enumeration cap.
SampleBatch sample_exact(const FactorGraph& fg, std::size_t n, std::uint64_t seed,
                         std::size_t cap = kDefaultEnumerationCap);

/// Systematic-scan Gibbs from a uniform random start. Throws ZeroSupport when
/// a full conditional has no positive entry.
SampleBatch sample_gibbs(const FactorGraph& fg, std::size_t n, std::uint64_t seed, std::size_t burn_in,
                         std::size_t thin);

/// Empirical single-variable marginals, [variable][value].
std::vector<std::vector<double>> empirical_marginals(const FactorGraph& fg, const SampleBatch& batch);

/// Synthetic entities per cluster and joint sample. `original` uses each
/// cluster's size in the assignment; `counts` overrides individual clusters.
struct RowsPerCluster {
  bool original = false;
  std::map<std::string, std::size_t> counts;
};

/// Converts each joint sample into entity and relationship rows; samples are
/// concatenated with disjoint keys `s<sample>_<cluster>_<i>`.
RelationalInstance materialize(const ErSchema& schema, const ClusterAssignment& clusters, const FactorGraph& fg,
                               const SampleBatch& batch, const RowsPerCluster& rows = {});

/// 64-bit FNV-1a, used to fingerprint model files in manifests.
std::uint64_t fnv1a64(std::string_view data);

} // namespace pfgsynth
