#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pfgsynth/clustering.hpp"
#include "pfgsynth/join.hpp"
#include "pfgsynth/learn.hpp"
#include "pfgsynth/model.hpp"
#include "pfgsynth/rng.hpp"
#include "pfgsynth/schema.hpp"

namespace support {

using namespace pfgsynth;

inline std::filesystem::path source_dir() { return PFGSYNTH_SOURCE_DIR; }
inline std::filesystem::path toy_dir() { return source_dir() / "data" / "toy"; }
inline std::filesystem::path test_data(const std::string& name) { return source_dir() / "tests" / "data" / name; }

struct Toy {
  ErSchema schema;
  RelationalInstance inst;
  AugmentedJoin join;
  ClusterAssignment clusters; // the fixed clusters of data/toy/clusters.csv
};

Toy load_toy();

/// The twelve-factor toy model learned from the pinned skeleton.
FactorGraph toy_model(std::optional<double> smoothing = std::nullopt);

class TempDir {
public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

/// One entity class `Row` whose attributes are the given columns; values are
/// indices into `range`.
struct SingleTable {
  ErSchema schema;
  RelationalInstance inst;
};
SingleTable single_table(const std::vector<std::string>& names, const std::vector<std::vector<ValueIndex>>& columns,
                         const Range& range = {"0", "1"});

/// Random factor graph with planted symmetric copies: templates replicated
/// over fresh variables (some argument positions shared across copies), with
/// per-copy argument shuffles and occasional exact duplicate factors.
FactorGraph random_factor_graph(Rng& rng, std::size_t max_variables = 30, std::size_t max_arity = 3);

} // namespace support
