#include "pfgsynth/join.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "pfgsynth/csv.hpp"
#include "pfgsynth/error.hpp"

namespace pfgsynth {

std::optional<std::size_t> AugmentedJoin::find_column(std::string_view name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].name == name) return c;
  }
  return std::nullopt;
}

std::size_t AugmentedJoin::column_index(std::string_view name) const {
  auto c = find_column(name);
  if (!c) throw QueryError("unknown join column '" + std::string(name) + "'");
  return *c;
}

std::string AugmentedJoin::cell(std::size_t c, std::size_t r) const {
  const auto v = data_[c][r];
  if (v == kAbsent) return {};
  return columns_[c].range[static_cast<std::size_t>(v)];
}

void AugmentedJoin::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(path.string() + ": cannot write file");
  std::vector<std::string> row;
  for (const auto& c : columns_) row.push_back(c.name);
  csv::write_row(out, row);
  for (std::size_t r = 0; r < rows_; ++r) {
    row.clear();
    for (std::size_t c = 0; c < columns_.size(); ++c) row.push_back(cell(c, r));
    csv::write_row(out, row);
  }
}

AugmentedJoin augmented_full_join(const ErSchema& schema, const RelationalInstance& inst, std::size_t row_cap) {
  const auto& entities = schema.entities();
  const auto& relationships = schema.relationships();

  std::size_t rows = 1;
  for (const auto& t : inst.entities) {
    if (t.size() != 0 && rows > row_cap / t.size()) {
      throw TooLarge("augmented join would exceed " + std::to_string(row_cap) + " rows");
    }
    rows *= t.size();
  }
  if (rows > row_cap) throw TooLarge("augmented join would exceed " + std::to_string(row_cap) + " rows");

  AugmentedJoin join;
  join.rows_ = rows;
  for (const auto& t : inst.entities) join.entity_sizes_.push_back(t.size());

  for (std::size_t e = 0; e < entities.size(); ++e) {
    join.key_columns_.push_back(join.columns_.size());
    join.columns_.push_back({entities[e].key, ColumnKind::EntityKey, e, 0, inst.entities[e].keys});
    for (std::size_t a = 0; a < entities[e].attributes.size(); ++a) {
      const auto& attr = entities[e].attributes[a];
      join.columns_.push_back({attr.name, ColumnKind::EntityAttribute, e, a, attr.range});
    }
  }
  for (std::size_t r = 0; r < relationships.size(); ++r) {
    join.columns_.push_back({relationships[r].name, ColumnKind::RelationshipIndicator, r, 0, kBooleanRange});
  }
  for (std::size_t r = 0; r < relationships.size(); ++r) {
    for (std::size_t a = 0; a < relationships[r].attributes.size(); ++a) {
      const auto& attr = relationships[r].attributes[a];
      join.columns_.push_back({attr.name, ColumnKind::RelationshipAttribute, r, a, attr.range});
    }
  }
  join.data_.assign(join.columns_.size(), std::vector<std::int32_t>(rows));

  // Entity rows in key order.
  std::vector<std::vector<std::size_t>> order(entities.size());
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const auto& keys = inst.entities[e].keys;
    order[e].resize(keys.size());
    std::iota(order[e].begin(), order[e].end(), std::size_t{0});
    std::sort(order[e].begin(), order[e].end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  }

  std::vector<std::size_t> strides(entities.size(), 1);
  for (std::size_t e = entities.size(); e-- > 1;) strides[e - 1] = strides[e] * inst.entities[e].size();

  for (std::size_t e = 0; e < entities.size(); ++e) {
    auto& keys = join.data_[join.key_columns_[e]];
    const auto n = inst.entities[e].size();
    for (std::size_t r = 0; r < rows; ++r) {
      const auto row = order[e][(r / strides[e]) % n];
      keys[r] = static_cast<std::int32_t>(row);
    }
    for (std::size_t a = 0; a < entities[e].attributes.size(); ++a) {
      auto& col = join.data_[join.key_columns_[e] + 1 + a];
      const auto& values = inst.entities[e].attributes[a];
      for (std::size_t r = 0; r < rows; ++r) col[r] = static_cast<std::int32_t>(values[static_cast<std::size_t>(keys[r])]);
    }
  }

  std::size_t first_indicator = 0;
  for (const auto& e : entities) first_indicator += 1 + e.attributes.size();
  std::size_t rel_attr_col = first_indicator + relationships.size();

  for (std::size_t ri = 0; ri < relationships.size(); ++ri) {
    const auto ents = schema.participant_entities(ri);
    const auto& table = inst.relationships[ri];
    auto encode = [&](auto&& row_of) {
      std::size_t code = 0;
      for (std::size_t p = 0; p < ents.size(); ++p) code = code * inst.entities[ents[p]].size() + row_of(p);
      return code;
    };
    std::unordered_map<std::size_t, std::size_t> tuples;
    for (std::size_t t = 0; t < table.size(); ++t) {
      tuples.emplace(encode([&](std::size_t p) { return table.participants[p][t]; }), t);
    }
    const auto ind_col = first_indicator + ri;
    const auto n_attr = relationships[ri].attributes.size();
    for (std::size_t r = 0; r < rows; ++r) {
      auto it = tuples.find(encode([&](std::size_t p) { return static_cast<std::size_t>(join.data_[join.key_columns_[ents[p]]][r]); }));
      const bool present = it != tuples.end();
      join.data_[ind_col][r] = present ? 0 : 1;
      for (std::size_t a = 0; a < n_attr; ++a) {
        join.data_[rel_attr_col + a][r] = present ? static_cast<std::int32_t>(table.attributes[a][it->second]) : kAbsent;
      }
    }
    rel_attr_col += n_attr;
  }
  return join;
}

std::size_t count_rows(const AugmentedJoin& join, const ErSchema& schema, const RelationalInstance& inst,
                       const EntityFilter& filter, const std::map<std::string, std::string>& column_values) {
  std::vector<std::pair<std::size_t, std::vector<char>>> allowed;
  for (const auto& [cls, keys] : filter) {
    auto e = schema.find_entity(cls);
    if (!e) throw QueryError("unknown entity class '" + cls + "'");
    std::vector<char> mask(inst.entities[*e].size(), 0);
    for (const auto& k : keys) {
      auto row = inst.entities[*e].row_of(k);
      if (!row) throw QueryError("unknown " + cls + " key '" + k + "'");
      mask[*row] = 1;
    }
    allowed.emplace_back(*e, std::move(mask));
  }
  std::vector<std::pair<std::size_t, std::int32_t>> wanted;
  for (const auto& [name, value] : column_values) {
    const auto c = join.column_index(name);
    const auto& range = join.columns()[c].range;
    auto it = std::find(range.begin(), range.end(), value);
    if (it == range.end()) throw QueryError("value '" + value + "' is not in the range of column " + name);
    wanted.emplace_back(c, static_cast<std::int32_t>(it - range.begin()));
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < join.row_count(); ++r) {
    bool ok = true;
    for (const auto& [e, mask] : allowed) {
      if (!mask[join.entity_row(e, r)]) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (const auto& [c, v] : wanted) {
      if (join.value(c, r) != v) {
        ok = false;
        break;
      }
    }
    if (ok) ++count;
  }
  return count;
}

} // namespace pfgsynth
