#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfgsynth/join.hpp"
#include "pfgsynth/schema.hpp"

namespace pfgsynth {

struct EntityClusters {
  std::string entity;
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> members; // per cluster, keys ascending

  std::size_t size() const { return labels.size(); }
  std::optional<std::size_t> find_label(std::string_view label) const;
  std::optional<std::size_t> cluster_of(std::string_view key) const;
};

/// Partition of every entity class into labelled clusters, in schema entity
/// order. Labels are unique across all classes.
class ClusterAssignment {
public:
  ClusterAssignment(const ErSchema& schema, std::vector<EntityClusters> classes);

  const std::vector<EntityClusters>& classes() const { return classes_; }
  const EntityClusters& of(std::string_view entity) const; // throws ParamError

private:
  std::vector<EntityClusters> classes_;
};

inline constexpr std::size_t kDefaultClusterCount = 2;
inline constexpr std::size_t kClusterRestarts = 10;

/// Categorical feature vector per entity row: attribute values followed by one
/// degree bucket (0, 1, 2+) per relationship the class takes part in.
std::vector<std::vector<std::uint32_t>> entity_features(const ErSchema& schema, const RelationalInstance& inst,
                                                        std::size_t entity);

/// Sum over clusters of the Hamming distance of each member to the cluster's
/// mode. `groups` holds row indices into `features`.
std::size_t kmodes_cost(const std::vector<std::vector<std::uint32_t>>& features,
                        const std::vector<std::vector<std::size_t>>& groups);

/// Seeded k-modes per entity class. Classes absent from `k` use the default.
/// Throws ParamError when k is 0 or exceeds the table size.
ClusterAssignment cluster_entities(const ErSchema& schema, const RelationalInstance& inst,
                                   const std::map<std::string, std::size_t>& k, std::uint64_t seed,
                                   std::size_t default_k = kDefaultClusterCount);

/// Reads an `entity_class,key,cluster` CSV. With an instance, every entity key
/// must be listed exactly once.
ClusterAssignment load_clusters(const std::filesystem::path& path, const ErSchema& schema,
                                const RelationalInstance* inst = nullptr);
void write_clusters(const std::filesystem::path& path, const ClusterAssignment& clusters);

/// count_rows restricted to one cluster per listed entity class.
std::size_t count_rows(const AugmentedJoin& join, const ErSchema& schema, const RelationalInstance& inst,
                       const ClusterAssignment& clusters, const std::map<std::string, std::string>& cluster_filter,
                       const std::map<std::string, std::string>& column_values);

} // namespace pfgsynth
