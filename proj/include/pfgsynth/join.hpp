#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfgsynth/schema.hpp"

namespace pfgsynth {

enum class ColumnKind { EntityKey, EntityAttribute, RelationshipIndicator, RelationshipAttribute };

struct JoinColumn {
  std::string name;
  ColumnKind kind;
  std::size_t owner;     // entity index (key/attribute) or relationship index
  std::size_t attribute; // attribute index within its owner; unused otherwise
  Range range;           // entity keys for key columns, {true,false} for indicators
};

inline constexpr std::int32_t kAbsent = -1;
inline const Range kBooleanRange{"true", "false"};

/// Cross product of all entity tables plus one Boolean indicator column per
/// relationship and its attribute columns (absent where the indicator is
/// false). Rows enumerate entity tuples lexicographically by key, first
/// entity class slowest. Immutable once built.
class AugmentedJoin {
public:
  const std::vector<JoinColumn>& columns() const { return columns_; }
  std::size_t row_count() const { return rows_; }
  std::size_t entity_count() const { return entity_sizes_.size(); }

  std::optional<std::size_t> find_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const; // throws QueryError

  /// Value code of column `c` in row `r` (kAbsent for missing relationship attributes).
  std::int32_t value(std::size_t c, std::size_t r) const { return data_[c][r]; }
  /// Row index within entity table `e` of the entity in row `r`.
  std::size_t entity_row(std::size_t e, std::size_t r) const {
    return static_cast<std::size_t>(data_[key_columns_[e]][r]);
  }
  std::size_t key_column(std::size_t e) const { return key_columns_[e]; }

  std::string cell(std::size_t c, std::size_t r) const;

  /// Debug export in canonical column order. Absent cells are empty.
  void write_csv(const std::filesystem::path& path) const;

private:
  friend AugmentedJoin augmented_full_join(const ErSchema&, const RelationalInstance&, std::size_t);

  std::vector<JoinColumn> columns_;
  std::vector<std::vector<std::int32_t>> data_;
  std::vector<std::size_t> key_columns_;
  std::vector<std::size_t> entity_sizes_;
  std::size_t rows_ = 0;
};

inline constexpr std::size_t kDefaultJoinRowCap = 10'000'000;

/// Throws TooLarge when the cross product exceeds `row_cap`.
AugmentedJoin augmented_full_join(const ErSchema& schema, const RelationalInstance& inst,
                                  std::size_t row_cap = kDefaultJoinRowCap);

/// Per entity class, the entity keys a row may carry. Classes not listed are
/// unrestricted.
using EntityFilter = std::map<std::string, std::vector<std::string>>;

/// Number of join rows whose entities pass `filter` and whose named columns
/// hold the given values. Throws QueryError for unknown classes, keys, columns
/// or values.
std::size_t count_rows(const AugmentedJoin& join, const ErSchema& schema, const RelationalInstance& inst,
                       const EntityFilter& filter, const std::map<std::string, std::string>& column_values);

} // namespace pfgsynth
