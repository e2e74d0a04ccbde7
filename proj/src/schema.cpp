#include "pfgsynth/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "pfgsynth/csv.hpp"
#include "pfgsynth/error.hpp"
#include "pfgsynth/model_io.hpp"

namespace pfgsynth {

namespace {

using nlohmann::json;

void check_name(const std::string& kind, const std::string& name) {
  if (name.empty()) throw LoadError("schema: " + kind + " with empty name");
  for (char c : name) {
    if (c == '.' || c == '{' || c == '}' || c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      throw LoadError("schema: " + kind + " name '" + name + "' may not contain '.', ',', braces or whitespace");
    }
  }
}

void check_attribute(const std::string& owner, const AttributeDef& a) {
  check_name("attribute", a.name);
  if (a.range.size() < 2) throw LoadError("schema: attribute " + owner + "." + a.name + " needs a range of at least two values");
  std::set<std::string> seen;
  for (const auto& v : a.range) {
    if (!seen.insert(v).second) throw LoadError("schema: attribute " + owner + "." + a.name + " repeats value '" + v + "'");
  }
}

std::vector<AttributeDef> parse_attributes(const json& j) {
  std::vector<AttributeDef> out;
  if (!j.contains("attributes")) return out;
  for (const auto& a : j.at("attributes")) {
    out.push_back({a.at("name").get<std::string>(), a.at("range").get<std::vector<std::string>>()});
  }
  return out;
}

json attributes_json(const std::vector<AttributeDef>& attrs) {
  json arr = json::array();
  for (const auto& a : attrs) arr.push_back({{"name", a.name}, {"range", a.range}});
  return arr;
}

// Maps header names to column positions and rejects unknown/missing columns.
std::vector<std::size_t> map_columns(const csv::Table& t, const std::vector<std::string>& expected,
                                     const std::string& file) {
  std::vector<std::size_t> pos(expected.size(), SIZE_MAX);
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    auto it = std::find(expected.begin(), expected.end(), t.header[c]);
    if (it == expected.end()) throw LoadError(file + ":1: unknown column '" + t.header[c] + "'");
    auto& slot = pos[static_cast<std::size_t>(it - expected.begin())];
    if (slot != SIZE_MAX) throw LoadError(file + ":1: duplicate column '" + t.header[c] + "'");
    slot = c;
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (pos[i] == SIZE_MAX) throw LoadError(file + ":1: missing column '" + expected[i] + "'");
  }
  return pos;
}

ValueIndex attribute_code(const AttributeDef& a, const std::string& value, const std::string& file, std::size_t line) {
  auto it = std::find(a.range.begin(), a.range.end(), value);
  if (it == a.range.end()) {
    throw LoadError(file + ":" + std::to_string(line) + ": value '" + value + "' is not in the range of " + a.name);
  }
  return static_cast<ValueIndex>(it - a.range.begin());
}

} // namespace

ErSchema::ErSchema(std::vector<EntityClass> entities, std::vector<RelationshipClass> relationships)
    : entities_(std::move(entities)), relationships_(std::move(relationships)) {
  if (entities_.empty()) throw LoadError("schema: no entity classes");
  std::set<std::string> classes;
  std::set<std::string> rv_bases;
  for (const auto& e : entities_) {
    check_name("entity", e.name);
    check_name("key column", e.key);
    if (!classes.insert(e.name).second) throw LoadError("schema: duplicate class name '" + e.name + "'");
    std::set<std::string> columns{e.key};
    for (const auto& a : e.attributes) {
      check_attribute(e.name, a);
      if (!columns.insert(a.name).second) throw LoadError("schema: duplicate column '" + a.name + "' in " + e.name);
      if (!rv_bases.insert(a.name).second) throw LoadError("schema: attribute name '" + a.name + "' is not unique");
    }
  }
  for (const auto& r : relationships_) {
    check_name("relationship", r.name);
    if (!classes.insert(r.name).second) throw LoadError("schema: duplicate class name '" + r.name + "'");
    if (!rv_bases.insert(r.name).second) throw LoadError("schema: relationship name '" + r.name + "' clashes with an attribute");
    if (r.participants.size() < 2) throw LoadError("schema: relationship " + r.name + " needs at least two participants");
    std::set<std::string> ents;
    std::set<std::string> columns;
    for (const auto& p : r.participants) {
      if (!find_entity(p.entity)) throw LoadError("schema: relationship " + r.name + " references unknown entity '" + p.entity + "'");
      if (!ents.insert(p.entity).second)
        throw LoadError("schema: relationship " + r.name + " lists entity " + p.entity + " twice (cyclic relationships are not supported)");
      check_name("key column", p.key);
      if (!columns.insert(p.key).second) throw LoadError("schema: duplicate column '" + p.key + "' in " + r.name);
    }
    for (const auto& a : r.attributes) {
      check_attribute(r.name, a);
      if (!columns.insert(a.name).second) throw LoadError("schema: duplicate column '" + a.name + "' in " + r.name);
      if (!rv_bases.insert(a.name).second) throw LoadError("schema: attribute name '" + a.name + "' is not unique");
    }
  }
}

std::optional<std::size_t> ErSchema::find_entity(std::string_view name) const {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (entities_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ErSchema::find_relationship(std::string_view name) const {
  for (std::size_t i = 0; i < relationships_.size(); ++i) {
    if (relationships_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ErSchema::entity_index(std::string_view name) const {
  auto i = find_entity(name);
  if (!i) throw LoadError("unknown entity class '" + std::string(name) + "'");
  return *i;
}

std::vector<std::size_t> ErSchema::participant_entities(std::size_t r) const {
  std::vector<std::size_t> out;
  for (const auto& p : relationships_.at(r).participants) out.push_back(*find_entity(p.entity));
  return out;
}

ErSchema parse_schema(std::string_view json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw LoadError(source + ": " + e.what());
  }
  try {
    std::vector<EntityClass> entities;
    for (const auto& e : doc.at("entities")) {
      entities.push_back({e.at("name").get<std::string>(), e.at("key").get<std::string>(), parse_attributes(e)});
    }
    std::vector<RelationshipClass> relationships;
    if (doc.contains("relationships")) {
      for (const auto& r : doc.at("relationships")) {
        RelationshipClass rc{r.at("name").get<std::string>(), {}, parse_attributes(r)};
        for (const auto& p : r.at("participants")) {
          rc.participants.push_back({p.at("entity").get<std::string>(), p.at("key").get<std::string>()});
        }
        relationships.push_back(std::move(rc));
      }
    }
    return ErSchema(std::move(entities), std::move(relationships));
  } catch (const json::exception& e) {
    throw LoadError(source + ": " + e.what());
  }
}

ErSchema load_schema(const std::filesystem::path& path) {
  return parse_schema(read_text(path), path.string());
}

std::string write_schema(const ErSchema& schema) {
  json doc;
  doc["entities"] = json::array();
  for (const auto& e : schema.entities()) {
    doc["entities"].push_back({{"name", e.name}, {"key", e.key}, {"attributes", attributes_json(e.attributes)}});
  }
  doc["relationships"] = json::array();
  for (const auto& r : schema.relationships()) {
    json parts = json::array();
    for (const auto& p : r.participants) parts.push_back({{"entity", p.entity}, {"key", p.key}});
    doc["relationships"].push_back({{"name", r.name}, {"participants", parts}, {"attributes", attributes_json(r.attributes)}});
  }
  return doc.dump(2) + "\n";
}

std::optional<std::size_t> EntityTable::row_of(std::string_view key) const {
  auto it = key_index.find(key);
  if (it == key_index.end()) return std::nullopt;
  return it->second;
}

RelationalInstance load_tables(const ErSchema& schema, const std::filesystem::path& data_dir) {
  if (!std::filesystem::is_directory(data_dir)) throw LoadError(data_dir.string() + ": data directory does not exist");
  RelationalInstance inst;
  for (const auto& e : schema.entities()) {
    const auto path = data_dir / (e.name + ".csv");
    const auto file = path.string();
    const auto t = csv::read(path);
    std::vector<std::string> expected{e.key};
    for (const auto& a : e.attributes) expected.push_back(a.name);
    const auto pos = map_columns(t, expected, file);

    EntityTable table;
    table.attributes.resize(e.attributes.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& key = t.rows[r][pos[0]];
      if (key.empty()) throw LoadError(file + ":" + std::to_string(t.lines[r]) + ": empty key");
      if (!table.key_index.emplace(key, table.keys.size()).second)
        throw LoadError(file + ":" + std::to_string(t.lines[r]) + ": duplicate key '" + key + "'");
      table.keys.push_back(key);
      for (std::size_t a = 0; a < e.attributes.size(); ++a) {
        table.attributes[a].push_back(attribute_code(e.attributes[a], t.rows[r][pos[a + 1]], file, t.lines[r]));
      }
    }
    inst.entities.push_back(std::move(table));
  }
  for (std::size_t ri = 0; ri < schema.relationships().size(); ++ri) {
    const auto& rel = schema.relationships()[ri];
    const auto path = data_dir / (rel.name + ".csv");
    const auto file = path.string();
    const auto t = csv::read(path);
    std::vector<std::string> expected;
    for (const auto& p : rel.participants) expected.push_back(p.key);
    for (const auto& a : rel.attributes) expected.push_back(a.name);
    const auto pos = map_columns(t, expected, file);
    const auto ents = schema.participant_entities(ri);

    RelationshipTable table;
    table.participants.resize(rel.participants.size());
    table.attributes.resize(rel.attributes.size());
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      std::vector<std::size_t> tuple;
      for (std::size_t p = 0; p < rel.participants.size(); ++p) {
        const auto& key = t.rows[r][pos[p]];
        auto row = inst.entities[ents[p]].row_of(key);
        if (!row) {
          throw LoadError(file + ":" + std::to_string(t.lines[r]) + ": dangling key '" + key + "' (no such " +
                          rel.participants[p].entity + ")");
        }
        tuple.push_back(*row);
      }
      if (!seen.insert(tuple).second) throw LoadError(file + ":" + std::to_string(t.lines[r]) + ": duplicate relationship tuple");
      for (std::size_t p = 0; p < tuple.size(); ++p) table.participants[p].push_back(tuple[p]);
      for (std::size_t a = 0; a < rel.attributes.size(); ++a) {
        table.attributes[a].push_back(
            attribute_code(rel.attributes[a], t.rows[r][pos[rel.participants.size() + a]], file, t.lines[r]));
      }
    }
    inst.relationships.push_back(std::move(table));
  }
  return inst;
}

std::pair<ErSchema, RelationalInstance> load_instance(const std::filesystem::path& schema_path,
                                                      const std::filesystem::path& data_dir) {
  auto schema = load_schema(schema_path);
  auto inst = load_tables(schema, data_dir);
  return {std::move(schema), std::move(inst)};
}

void write_instance(const ErSchema& schema, const RelationalInstance& inst, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / (name + ".csv"), std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError((dir / (name + ".csv")).string() + ": cannot write file");
    return out;
  };
  for (std::size_t ei = 0; ei < schema.entities().size(); ++ei) {
    const auto& e = schema.entities()[ei];
    const auto& t = inst.entities.at(ei);
    auto out = open(e.name);
    std::vector<std::string> header{e.key};
    for (const auto& a : e.attributes) header.push_back(a.name);
    csv::write_row(out, header);
    for (std::size_t r = 0; r < t.size(); ++r) {
      std::vector<std::string> row{t.keys[r]};
      for (std::size_t a = 0; a < e.attributes.size(); ++a) row.push_back(e.attributes[a].range[t.attributes[a][r]]);
      csv::write_row(out, row);
    }
  }
  for (std::size_t ri = 0; ri < schema.relationships().size(); ++ri) {
    const auto& rel = schema.relationships()[ri];
    const auto& t = inst.relationships.at(ri);
    const auto ents = schema.participant_entities(ri);
    auto out = open(rel.name);
    std::vector<std::string> header;
    for (const auto& p : rel.participants) header.push_back(p.key);
    for (const auto& a : rel.attributes) header.push_back(a.name);
    csv::write_row(out, header);
    for (std::size_t r = 0; r < t.size(); ++r) {
      std::vector<std::string> row;
      for (std::size_t p = 0; p < ents.size(); ++p) row.push_back(inst.entities.at(ents[p]).keys[t.participants[p][r]]);
      for (std::size_t a = 0; a < rel.attributes.size(); ++a) row.push_back(rel.attributes[a].range[t.attributes[a][r]]);
      csv::write_row(out, row);
    }
  }
}

Binning equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  if (bins < 2) throw ParamError("binning needs at least two bins");
  if (values.empty()) throw ParamError("binning needs at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  Binning b;
  const std::size_t n = sorted.size();
  for (std::size_t i = 1; i < bins; ++i) {
    const double cut = sorted[std::min(n - 1, (i * n + bins - 1) / bins)];
    // A cut equal to the minimum would leave the first bin empty.
    if (cut > sorted.front() && (b.cuts.empty() || cut > b.cuts.back())) b.cuts.push_back(cut);
  }
  for (std::size_t i = 0; i <= b.cuts.size(); ++i) b.range.push_back("b" + std::to_string(i));
  for (double v : values) {
    const auto bin = static_cast<std::size_t>(std::upper_bound(b.cuts.begin(), b.cuts.end(), v) - b.cuts.begin());
    b.labels.push_back(b.range[bin]);
  }
  return b;
}

} // namespace pfgsynth
