#include "pfgsynth/sampler.hpp"

#include <algorithm>
#include <sstream>

#include "pfgsynth/error.hpp"
#include "pfgsynth/join.hpp"
#include "pfgsynth/rng.hpp"

namespace pfgsynth {

std::string to_string(SamplerMethod method) { return method == SamplerMethod::Exact ? "exact" : "gibbs"; }

SamplerMethod parse_sampler_method(const std::string& text) {
  if (text == "exact") return SamplerMethod::Exact;
  if (text == "gibbs") return SamplerMethod::Gibbs;
  throw ParamError("unknown sampler method '" + text + "' (expected exact or gibbs)");
}

namespace {

SampleBatch empty_batch(const FactorGraph& fg, std::uint64_t seed, SamplerMethod method) {
  SampleBatch batch;
  for (const auto& v : fg.variables()) batch.variables.push_back(v.name);
  batch.seed = seed;
  batch.method = method;
  return batch;
}

std::string describe_state(const FactorGraph& fg, const std::vector<ValueIndex>& state) {
  std::ostringstream out;
  for (std::size_t v = 0; v < state.size(); ++v) {
    if (v == 12) {
      out << " ...";
      break;
    }
    out << (v ? ", " : "") << fg.variables()[v].name << '=' << fg.variables()[v].range[state[v]];
  }
  return out.str();
}

} // namespace

SampleBatch sample_exact(const FactorGraph& fg, std::size_t n, std::uint64_t seed, std::size_t cap) {
  const auto dist = exact_distribution(fg, cap);
  std::vector<double> cdf(dist.probabilities.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = acc += dist.probabilities[i];

  auto batch = empty_batch(fg, seed, SamplerMethod::Exact);
  Rng rng(seed);
  batch.samples.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform() * cdf.back();
    auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (idx == cdf.size()) idx = cdf.size() - 1;
    batch.samples.push_back(dist.state(idx));
  }
  return batch;
}

SampleBatch sample_gibbs(const FactorGraph& fg, std::size_t n, std::uint64_t seed, std::size_t burn_in,
                         std::size_t thin) {
  if (thin == 0) throw ParamError("thin must be at least 1");
  const auto& vars = fg.variables();
  const auto& factors = fg.factors();

  // For every variable: (factor, stride of the variable in that factor's table).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> links(vars.size());
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const auto strides = table_strides(fg.cardinalities(factors[f]));
    for (std::size_t p = 0; p < factors[f].args.size(); ++p) links[factors[f].args[p]].emplace_back(f, strides[p]);
  }

  Rng rng(seed);
  std::vector<ValueIndex> state(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) state[v] = static_cast<ValueIndex>(rng.below(vars[v].cardinality()));

  std::vector<double> weights;
  auto sweep = [&] {
    for (std::size_t v = 0; v < vars.size(); ++v) {
      const auto k = vars[v].cardinality();
      weights.assign(k, 1.0);
      for (auto [f, stride] : links[v]) {
        const auto base = fg.table_offset(factors[f], state) - state[v] * stride;
        for (std::size_t x = 0; x < k; ++x) weights[x] *= factors[f].table[base + x * stride];
      }
      double total = 0.0;
      for (auto w : weights) total += w;
      if (!(total > 0.0)) {
        throw ZeroSupport("variable " + vars[v].name + " has no value with positive weight given " +
                          describe_state(fg, state) + "; relearn with --smooth");
      }
      const double u = rng.uniform() * total;
      double acc = 0.0;
      ValueIndex pick = static_cast<ValueIndex>(k - 1);
      for (std::size_t x = 0; x < k; ++x) {
        acc += weights[x];
        if (u < acc && weights[x] > 0.0) {
          pick = static_cast<ValueIndex>(x);
          break;
        }
      }
      while (weights[pick] == 0.0) --pick;
      state[v] = pick;
    }
  };

  auto batch = empty_batch(fg, seed, SamplerMethod::Gibbs);
  batch.burn_in = burn_in;
  batch.thin = thin;
  for (std::size_t i = 0; i < burn_in; ++i) sweep();
  batch.samples.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < thin; ++t) sweep();
    batch.samples.push_back(state);
  }
  return batch;
}

std::vector<std::vector<double>> empirical_marginals(const FactorGraph& fg, const SampleBatch& batch) {
  std::vector<std::vector<double>> out;
  for (const auto& v : fg.variables()) out.emplace_back(v.cardinality(), 0.0);
  if (batch.samples.empty()) return out;
  for (const auto& s : batch.samples) {
    for (std::size_t v = 0; v < s.size(); ++v) out[v][s[v]] += 1.0;
  }
  for (auto& m : out) {
    for (auto& p : m) p /= static_cast<double>(batch.samples.size());
  }
  return out;
}

RelationalInstance materialize(const ErSchema& schema, const ClusterAssignment& clusters, const FactorGraph& fg,
                               const SampleBatch& batch, const RowsPerCluster& rows) {
  if (batch.variables.size() != fg.variables().size()) throw ParamError("sample batch does not match the model");
  for (std::size_t v = 0; v < batch.variables.size(); ++v) {
    if (batch.variables[v] != fg.variables()[v].name) throw ParamError("sample batch does not match the model");
  }
  for (const auto& [label, _] : rows.counts) {
    bool known = false;
    for (const auto& ec : clusters.classes()) known = known || ec.find_label(label).has_value();
    if (!known) throw ParamError("rows-per-cluster names unknown cluster '" + label + "'");
  }
  auto rv = [&](const std::string& name, const Range& range) {
    auto v = fg.find_variable(name);
    if (!v) throw ParamError("model has no random variable '" + name + "' for the given schema and clusters");
    if (fg.variables()[*v].range != range) throw ParamError("random variable '" + name + "' has a range that differs from the schema");
    return *v;
  };
  auto count_for = [&](const EntityClusters& ec, std::size_t c) {
    auto it = rows.counts.find(ec.labels[c]);
    if (it != rows.counts.end()) return it->second;
    return rows.original ? ec.members[c].size() : std::size_t{1};
  };

  RelationalInstance out;
  out.entities.resize(schema.entities().size());
  out.relationships.resize(schema.relationships().size());
  for (std::size_t e = 0; e < schema.entities().size(); ++e) out.entities[e].attributes.resize(schema.entities()[e].attributes.size());
  for (std::size_t r = 0; r < schema.relationships().size(); ++r) {
    out.relationships[r].participants.resize(schema.relationships()[r].participants.size());
    out.relationships[r].attributes.resize(schema.relationships()[r].attributes.size());
  }

  // Variable indices resolved once: [entity][attribute][cluster].
  std::vector<std::vector<std::vector<std::size_t>>> attr_rv(schema.entities().size());
  for (std::size_t e = 0; e < schema.entities().size(); ++e) {
    const auto& ent = schema.entities()[e];
    const auto& ec = clusters.of(ent.name);
    for (const auto& a : ent.attributes) {
      std::vector<std::size_t> per;
      for (const auto& label : ec.labels) per.push_back(rv(a.name + "." + label, a.range));
      attr_rv[e].push_back(std::move(per));
    }
  }

  for (std::size_t s = 0; s < batch.samples.size(); ++s) {
    const auto& sample = batch.samples[s];
    // made[e][cluster] -> synthesized entity rows
    std::vector<std::vector<std::vector<std::size_t>>> made(schema.entities().size());
    for (std::size_t e = 0; e < schema.entities().size(); ++e) {
      const auto& ec = clusters.of(schema.entities()[e].name);
      auto& table = out.entities[e];
      made[e].resize(ec.size());
      for (std::size_t c = 0; c < ec.size(); ++c) {
        const auto n = count_for(ec, c);
        for (std::size_t i = 0; i < n; ++i) {
          const auto key = "s" + std::to_string(s + 1) + "_" + ec.labels[c] + "_" + std::to_string(i + 1);
          made[e][c].push_back(table.keys.size());
          table.key_index.emplace(key, table.keys.size());
          table.keys.push_back(key);
          for (std::size_t a = 0; a < attr_rv[e].size(); ++a) table.attributes[a].push_back(sample[attr_rv[e][a][c]]);
        }
      }
    }
    for (std::size_t r = 0; r < schema.relationships().size(); ++r) {
      const auto& rel = schema.relationships()[r];
      const auto ents = schema.participant_entities(r);
      std::vector<std::size_t> sizes;
      for (auto e : ents) sizes.push_back(clusters.of(schema.entities()[e].name).size());
      std::vector<std::size_t> combo(ents.size(), 0);
      auto& table = out.relationships[r];
      while (true) {
        std::string tags;
        for (std::size_t p = 0; p < ents.size(); ++p) tags += "." + clusters.of(schema.entities()[ents[p]].name).labels[combo[p]];
        if (sample[rv(rel.name + tags, kBooleanRange)] == 0) {
          std::vector<std::size_t> attrs;
          for (const auto& a : rel.attributes) attrs.push_back(sample[rv(a.name + tags, a.range)]);
          // All tuples among the synthesized members of this combination.
          std::vector<std::size_t> pick(ents.size(), 0);
          bool any = true;
          for (std::size_t p = 0; p < ents.size(); ++p) any = any && !made[ents[p]][combo[p]].empty();
          while (any) {
            for (std::size_t p = 0; p < ents.size(); ++p) table.participants[p].push_back(made[ents[p]][combo[p]][pick[p]]);
            for (std::size_t a = 0; a < attrs.size(); ++a) table.attributes[a].push_back(static_cast<ValueIndex>(attrs[a]));
            std::size_t p = ents.size();
            while (p > 0) {
              --p;
              if (++pick[p] < made[ents[p]][combo[p]].size()) break;
              pick[p] = 0;
              if (p == 0) any = false;
            }
          }
        }
        std::size_t p = ents.size();
        bool done = true;
        while (p > 0) {
          --p;
          if (++combo[p] < sizes[p]) {
            done = false;
            break;
          }
          combo[p] = 0;
        }
        if (done) break;
      }
    }
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace pfgsynth
