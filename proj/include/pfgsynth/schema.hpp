#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfgsynth/model.hpp"

namespace pfgsynth {

struct AttributeDef {
  std::string name;
  Range range;
};

struct EntityClass {
  std::string name;
  std::string key;
  std::vector<AttributeDef> attributes;
};

struct Participant {
  std::string entity;
  std::string key; // column name in the relationship CSV
};

struct RelationshipClass {
  std::string name;
  std::vector<Participant> participants;
  std::vector<AttributeDef> attributes;
};

/// Entity-relationship schema. Entity, relationship and attribute names share
/// one namespace because they become random-variable base names.
class ErSchema {
public:
  ErSchema(std::vector<EntityClass> entities, std::vector<RelationshipClass> relationships);

  const std::vector<EntityClass>& entities() const { return entities_; }
  const std::vector<RelationshipClass>& relationships() const { return relationships_; }

  std::optional<std::size_t> find_entity(std::string_view name) const;
  std::optional<std::size_t> find_relationship(std::string_view name) const;
  std::size_t entity_index(std::string_view name) const; // throws LoadError

  /// Entity indices participating in relationship `r`, in participant order.
  std::vector<std::size_t> participant_entities(std::size_t r) const;

private:
  std::vector<EntityClass> entities_;
  std::vector<RelationshipClass> relationships_;
};

/// Parses the JSON schema document:
///   {"entities": [{"name", "key", "attributes": [{"name", "range": [...]}]}],
///    "relationships": [{"name", "participants": [{"entity", "key"}], "attributes": [...]}]}
ErSchema parse_schema(std::string_view json_text, const std::string& source = "schema");
ErSchema load_schema(const std::filesystem::path& path);
std::string write_schema(const ErSchema& schema);

struct EntityTable {
  std::vector<std::string> keys;
  std::vector<std::vector<ValueIndex>> attributes; // [attribute][row]

  std::size_t size() const { return keys.size(); }
  std::optional<std::size_t> row_of(std::string_view key) const;

  std::map<std::string, std::size_t, std::less<>> key_index;
};

struct RelationshipTable {
  std::vector<std::vector<std::size_t>> participants; // [participant][row] -> entity row
  std::vector<std::vector<ValueIndex>> attributes;     // [attribute][row]

  std::size_t size() const { return participants.empty() ? 0 : participants.front().size(); }
};

struct RelationalInstance {
  std::vector<EntityTable> entities;           // schema entity order
  std::vector<RelationshipTable> relationships; // schema relationship order
};

/// Reads `<data_dir>/<ClassName>.csv` for every entity and relationship class.
/// Checks unknown/missing columns, out-of-range values, duplicate keys,
/// duplicate relationship tuples and dangling foreign keys (LoadError naming
/// file and line).
RelationalInstance load_tables(const ErSchema& schema, const std::filesystem::path& data_dir);
std::pair<ErSchema, RelationalInstance> load_instance(const std::filesystem::path& schema_path,
                                                      const std::filesystem::path& data_dir);

/// Writes one CSV per class in declared column order.
void write_instance(const ErSchema& schema, const RelationalInstance& inst, const std::filesystem::path& dir);

/// Equal-frequency binning for a numeric column: returns cut points (bins-1
/// ascending values) and a label per input value. Labels are "b0".."b{k-1}".
struct Binning {
  std::vector<double> cuts;
  std::vector<std::string> labels;
  Range range;
};
Binning equal_frequency_bins(std::span<const double> values, std::size_t bins);

} // namespace pfgsynth
