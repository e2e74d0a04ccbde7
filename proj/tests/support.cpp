#include "support.hpp"

#include <algorithm>
#include <numeric>

#include <unistd.h>

#include "pfgsynth/model_io.hpp"

namespace support {

Toy load_toy() {
  auto [schema, inst] = load_instance(toy_dir() / "schema.json", toy_dir());
  auto join = augmented_full_join(schema, inst);
  auto clusters = load_clusters(toy_dir() / "clusters.csv", schema, &inst);
  return Toy{std::move(schema), std::move(inst), std::move(join), std::move(clusters)};
}

FactorGraph toy_model(std::optional<double> smoothing) {
  const auto toy = load_toy();
  const auto skeleton = parse_skeleton(read_text(toy_dir() / "skeleton.txt"), learnable_columns(toy.join));
  const auto sigs = instantiate_factors(toy.schema, skeleton, toy.clusters);
  return learn_potentials(toy.join, toy.schema, toy.inst, toy.clusters, sigs, smoothing);
}

TempDir::TempDir() {
  static std::uint64_t counter = 0;
  const auto base = std::filesystem::temp_directory_path();
  Rng rng(splitmix64(static_cast<std::uint64_t>(::getpid()) * 1315423911ULL + counter++));
  do {
    path_ = base / ("pfgsynth-test-" + std::to_string(rng.below(1'000'000'000)));
  } while (std::filesystem::exists(path_));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

SingleTable single_table(const std::vector<std::string>& names, const std::vector<std::vector<ValueIndex>>& columns,
                         const Range& range) {
  EntityClass row{"Row", "RowId", {}};
  for (const auto& n : names) row.attributes.push_back({n, range});
  ErSchema schema({row}, {});

  RelationalInstance inst;
  inst.entities.resize(1);
  auto& table = inst.entities[0];
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    auto key = std::to_string(i);
    key = "r" + std::string(7 - std::min<std::size_t>(7, key.size()), '0') + key;
    table.key_index.emplace(key, i);
    table.keys.push_back(std::move(key));
  }
  table.attributes = columns;
  return SingleTable{std::move(schema), std::move(inst)};
}

namespace {

const Range kBool{"true", "false"};
const Range kTri{"lo", "mid", "hi"};

PotentialTable random_table(Rng& rng, std::size_t size) {
  PotentialTable t(size);
  bool positive = false;
  while (!positive) {
    for (auto& x : t) {
      // Small integers give accidental ties; halves exercise non-integer paths.
      x = static_cast<double>(rng.below(5)) + (rng.below(4) == 0 ? 0.5 : 0.0);
      positive = positive || x > 0.0;
    }
  }
  return t;
}

} // namespace

FactorGraph random_factor_graph(Rng& rng, std::size_t max_variables, std::size_t max_arity) {
  std::vector<RandomVariable> vars;
  std::vector<FactorSpec> factors;
  std::size_t plain = 0;
  auto fresh = [&](const std::string& name, const Range& range) {
    vars.push_back({name, range});
    return name;
  };
  auto plain_name = [&] { return "v" + std::to_string(plain++); };

  const std::size_t budget = 2 + rng.below(max_variables - 1);
  std::size_t tmpl = 0;
  while (vars.size() < budget) {
    const std::size_t arity = 1 + rng.below(max_arity);
    std::vector<Range> ranges;
    for (std::size_t p = 0; p < arity; ++p) ranges.push_back(rng.below(3) == 0 ? kTri : kBool);
    std::vector<std::size_t> cards;
    for (const auto& r : ranges) cards.push_back(r.size());
    const auto table = random_table(rng, table_size(cards));

    const std::size_t copies = 1 + rng.below(4);
    const bool structured = rng.below(3) != 0;
    std::vector<bool> shared(arity, false);
    if (arity > 1) shared[rng.below(arity)] = rng.below(2) == 0;

    std::vector<std::string> shared_names(arity);
    std::size_t needed = 0;
    for (std::size_t p = 0; p < arity; ++p) needed += shared[p] ? 1 : copies;
    if (!factors.empty() && vars.size() + needed > max_variables) break;
    if (vars.size() + needed > max_variables) continue;

    for (std::size_t p = 0; p < arity; ++p) {
      if (!shared[p]) continue;
      // Occasionally reuse an existing variable of the right range.
      std::vector<std::size_t> candidates;
      for (std::size_t v = 0; v < vars.size(); ++v) {
        if (vars[v].range == ranges[p]) candidates.push_back(v);
      }
      if (!candidates.empty() && rng.below(3) == 0) {
        shared_names[p] = vars[candidates[rng.below(candidates.size())]].name;
      } else {
        shared_names[p] = fresh(structured ? "S" + std::to_string(tmpl) + "_" + std::to_string(p) : plain_name(), ranges[p]);
      }
    }

    for (std::size_t c = 0; c < copies; ++c) {
      std::vector<std::string> args(arity);
      for (std::size_t p = 0; p < arity; ++p) {
        if (shared[p]) {
          args[p] = shared_names[p];
        } else if (structured) {
          args[p] = fresh("T" + std::to_string(tmpl) + "P" + std::to_string(p) + ".c" + std::to_string(c), ranges[p]);
        } else {
          args[p] = fresh(plain_name(), ranges[p]);
        }
      }
      // Same factor, arguments listed in a random order.
      std::vector<std::size_t> perm(arity);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = arity; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      std::vector<std::string> shuffled;
      for (auto p : perm) shuffled.push_back(args[p]);
      const auto permuted = permute_table(table, cards, perm);

      const auto name = "f" + std::to_string(factors.size());
      factors.push_back({name, shuffled, permuted});
      if (rng.below(10) == 0) factors.push_back({"f" + std::to_string(factors.size()), shuffled, permuted});
    }
    ++tmpl;
  }
  return FactorGraph(std::move(vars), std::move(factors));
}

} // namespace support
