#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "pfgsynth/clustering.hpp"
#include "pfgsynth/csv.hpp"
#include "pfgsynth/error.hpp"
#include "pfgsynth/model_io.hpp"
#include "support.hpp"

using namespace pfgsynth;

namespace {

using Members = std::set<std::set<std::string>>;

Members membership(const EntityClusters& ec) {
  Members out;
  for (const auto& m : ec.members) out.insert(std::set<std::string>(m.begin(), m.end()));
  return out;
}

void check_partition(const EntityClusters& ec, const EntityTable& table) {
  std::multiset<std::string> seen;
  for (const auto& m : ec.members) {
    EXPECT_FALSE(m.empty());
    EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
    seen.insert(m.begin(), m.end());
  }
  EXPECT_EQ(seen, std::multiset<std::string>(table.keys.begin(), table.keys.end()));
}

std::string clusters_error(const std::string& text) {
  const auto toy = support::load_toy();
  support::TempDir dir;
  save_text(dir / "clusters.csv", text);
  try {
    load_clusters(dir / "clusters.csv", toy.schema, &toy.inst);
  } catch (const LoadError& e) {
    return e.what();
  }
  return "";
}

/// Writes the toy tables with every CSV's data rows reversed.
void write_reversed_toy(const std::filesystem::path& dir) {
  for (const auto* name : {"Patient.csv", "Medication.csv", "Treat.csv"}) {
    auto t = csv::read(support::toy_dir() / name);
    std::reverse(t.rows.begin(), t.rows.end());
    std::ofstream out(dir / name, std::ios::binary);
    csv::write_row(out, t.header);
    for (const auto& r : t.rows) csv::write_row(out, r);
  }
  std::filesystem::copy_file(support::toy_dir() / "schema.json", dir / "schema.json");
}

} // namespace

TEST(Clusters, FixedFileGivesExampleClusters) {
  const auto toy = support::load_toy();
  const auto& p = toy.clusters.of("Patient");
  const auto& m = toy.clusters.of("Medication");
  EXPECT_EQ(p.labels, (std::vector<std::string>{"p1", "p2"}));
  EXPECT_EQ(p.members[0], (std::vector<std::string>{"alice", "eve"}));
  EXPECT_EQ(p.members[1], (std::vector<std::string>{"bob", "charlie", "dave"}));
  EXPECT_EQ(m.members[0], (std::vector<std::string>{"danyelza", "eliquis", "myalept"}));
  EXPECT_EQ(m.members[1], (std::vector<std::string>{"ibuprofen", "paracetamol"}));
  EXPECT_EQ(*p.cluster_of("dave"), 1u);
  EXPECT_THROW(toy.clusters.of("Treat"), ParamError);
}

TEST(Clusters, FileErrors) {
  const std::string header = "entity_class,key,cluster\n";
  const std::string meds = "Medication,myalept,m1\nMedication,danyelza,m1\nMedication,eliquis,m1\n"
                           "Medication,paracetamol,m2\nMedication,ibuprofen,m2\n";
  const std::string patients = "Patient,alice,p1\nPatient,eve,p1\nPatient,bob,p2\nPatient,charlie,p2\n";
  EXPECT_EQ(clusters_error(header + patients + "Patient,dave,p2\n" + meds), "");
  EXPECT_NE(clusters_error(header + patients + "Patient,dave,p2\nPatient,alice,p2\n" + meds).find("alice"), std::string::npos);
  EXPECT_NE(clusters_error(header + patients + meds).find("dave"), std::string::npos);
  EXPECT_NE(clusters_error(header + patients + "Patient,zed,p2\n" + meds).find("zed"), std::string::npos);
  EXPECT_NE(clusters_error(header + patients + "Doctor,dave,p2\n" + meds).find("Doctor"), std::string::npos);
  EXPECT_FALSE(clusters_error("class,key,cluster\n" + patients + meds).empty());
  // Labels are shared between classes only at the cost of ambiguous RV names.
  EXPECT_FALSE(clusters_error(header + patients + "Patient,dave,p2\n" + "Medication,myalept,p1\nMedication,danyelza,m1\n"
                              "Medication,eliquis,m1\nMedication,paracetamol,m2\nMedication,ibuprofen,m2\n")
                   .empty());
}

TEST(Clusters, WriteLoadRoundTrip) {
  const auto toy = support::load_toy();
  support::TempDir dir;
  write_clusters(dir / "c.csv", toy.clusters);
  const auto back = load_clusters(dir / "c.csv", toy.schema, &toy.inst);
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_EQ(back.classes()[e].labels, toy.clusters.classes()[e].labels);
    EXPECT_EQ(back.classes()[e].members, toy.clusters.classes()[e].members);
  }
}

TEST(KModes, Features) {
  const auto toy = support::load_toy();
  const auto f = entity_features(toy.schema, toy.inst, 0);
  // Patient.csv order: alice, bob, charlie, dave, eve. Age index then Treat degree bucket.
  EXPECT_EQ(f[0], (std::vector<std::uint32_t>{1, 2}));
  EXPECT_EQ(f[1], (std::vector<std::uint32_t>{1, 1}));
  EXPECT_EQ(f[3], (std::vector<std::uint32_t>{0, 0}));
  EXPECT_EQ(f[4], (std::vector<std::uint32_t>{0, 1}));
}

TEST(KModes, TwoClustersAreObjectiveMinimal) {
  const auto toy = support::load_toy();
  for (std::uint64_t seed : {0u, 1u, 7u, 42u}) {
    const auto clusters = cluster_entities(toy.schema, toy.inst, {}, seed);
    for (std::size_t e = 0; e < 2; ++e) {
      const auto& table = toy.inst.entities[e];
      const auto features = entity_features(toy.schema, toy.inst, e);
      std::size_t best = SIZE_MAX;
      std::size_t partitions = 0;
      // Element 0 stays in the first group so every split is enumerated once.
      for (unsigned mask = 0; mask < (1u << (table.size() - 1)); ++mask) {
        std::vector<std::vector<std::size_t>> groups(2);
        groups[0].push_back(0);
        for (std::size_t i = 1; i < table.size(); ++i) groups[(mask >> (i - 1)) & 1u].push_back(i);
        if (groups[1].empty()) continue;
        ++partitions;
        best = std::min(best, kmodes_cost(features, groups));
      }
      EXPECT_EQ(partitions, 15u);

      const auto& ec = clusters.classes()[e];
      ASSERT_EQ(ec.size(), 2u);
      check_partition(ec, table);
      std::vector<std::vector<std::size_t>> ours;
      for (const auto& m : ec.members) {
        ours.emplace_back();
        for (const auto& k : m) ours.back().push_back(*table.row_of(k));
      }
      EXPECT_EQ(kmodes_cost(features, ours), best) << "seed " << seed << " class " << ec.entity;
    }
  }
}

TEST(KModes, LabelsAndOrder) {
  const auto toy = support::load_toy();
  const auto clusters = cluster_entities(toy.schema, toy.inst, {{"Patient", 3}}, 1);
  const auto& p = clusters.of("Patient");
  EXPECT_EQ(p.labels, (std::vector<std::string>{"p1", "p2", "p3"}));
  EXPECT_EQ(clusters.of("Medication").labels, (std::vector<std::string>{"m1", "m2"}));
  for (std::size_t c = 1; c < p.size(); ++c) EXPECT_LT(p.members[c - 1].front(), p.members[c].front());
}

TEST(KModes, KEqualsTableSizeGivesSingletons) {
  const auto toy = support::load_toy();
  const auto clusters = cluster_entities(toy.schema, toy.inst, {{"Patient", 5}, {"Medication", 5}}, 3);
  for (const auto& ec : clusters.classes()) {
    ASSERT_EQ(ec.size(), 5u);
    for (const auto& m : ec.members) EXPECT_EQ(m.size(), 1u);
  }
  EXPECT_EQ(clusters.of("Patient").members[0], (std::vector<std::string>{"alice"}));
}

TEST(KModes, KOneIsWholeTable) {
  const auto toy = support::load_toy();
  const auto clusters = cluster_entities(toy.schema, toy.inst, {{"Patient", 1}, {"Medication", 1}}, 3);
  EXPECT_EQ(clusters.of("Patient").members[0].size(), 5u);
}

TEST(KModes, ParameterErrors) {
  const auto toy = support::load_toy();
  EXPECT_THROW(cluster_entities(toy.schema, toy.inst, {{"Patient", 0}}, 0), ParamError);
  EXPECT_THROW(cluster_entities(toy.schema, toy.inst, {{"Patient", 6}}, 0), ParamError);
  EXPECT_THROW(cluster_entities(toy.schema, toy.inst, {{"Doctor", 2}}, 0), ParamError);
}

TEST(KModes, DeterministicForSeed) {
  const auto toy = support::load_toy();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = cluster_entities(toy.schema, toy.inst, {{"Patient", 3}}, seed);
    const auto b = cluster_entities(toy.schema, toy.inst, {{"Patient", 3}}, seed);
    for (std::size_t e = 0; e < 2; ++e) {
      EXPECT_EQ(a.classes()[e].labels, b.classes()[e].labels);
      EXPECT_EQ(a.classes()[e].members, b.classes()[e].members);
    }
  }
}

TEST(KModes, RowOrderDoesNotChangeMembership) {
  const auto toy = support::load_toy();
  support::TempDir dir;
  write_reversed_toy(dir.path());
  const auto [schema, reversed] = load_instance(dir / "schema.json", dir.path());
  ASSERT_EQ(reversed.entities[0].keys.front(), "eve");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (std::size_t k = 1; k <= 4; ++k) {
      const auto a = cluster_entities(toy.schema, toy.inst, {{"Patient", k}, {"Medication", k}}, seed);
      const auto b = cluster_entities(schema, reversed, {{"Patient", k}, {"Medication", k}}, seed);
      for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(membership(a.classes()[e]), membership(b.classes()[e])) << "seed " << seed << " k " << k;
      }
    }
  }
}

TEST(KModes, PartitionLawsOnSingleTables) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<std::vector<ValueIndex>> cols(3, std::vector<ValueIndex>(n));
    for (auto& c : cols) {
      for (auto& v : c) v = static_cast<ValueIndex>(rng.below(2));
    }
    const auto t = support::single_table({"a", "b", "c"}, cols);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n, 5));
    const auto clusters = cluster_entities(t.schema, t.inst, {{"Row", k}}, trial);
    ASSERT_EQ(clusters.classes()[0].size(), k);
    check_partition(clusters.classes()[0], t.inst.entities[0]);
  }
}
