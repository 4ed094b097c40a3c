#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pathjoin/dictionary.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

// Reproducible dataset and query generation for tests, benchmarks and the
// `gen` CLI subcommand. Everything is driven by one seeded mt19937_64.

struct GenOptions {
  enum class Shape { Random, Chain, Hierarchy };
  std::uint64_t seed = 1;
  int vertices = 100;
  int properties = 4;
  double edge_factor = 2.0;  // edges ~ vertices * edge_factor
  Shape shape = Shape::Random;
};

struct Instance {
  Dictionary dict;
  std::vector<EncodedTriple> triples;
  std::vector<TermId> vertex_ids;
  std::vector<TermId> property_ids;
};

inline std::string vertex_name(int i) { return "urn:v" + std::to_string(i); }
inline std::string property_name(int i) { return "urn:p" + std::to_string(i); }

inline Instance generate_dataset(const GenOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  Instance inst;
  const int n = std::max(2, opt.vertices);
  const int np = std::max(1, opt.properties);
  for (int i = 0; i < n; ++i) inst.vertex_ids.push_back(inst.dict.encode(iri(vertex_name(i))));
  for (int j = 0; j < np; ++j)
    inst.property_ids.push_back(inst.dict.encode(iri(property_name(j))));

  auto add = [&](TermId s, TermId p, TermId o) { inst.triples.push_back({s, p, o}); };
  const auto edges = static_cast<std::size_t>(n * opt.edge_factor);

  switch (opt.shape) {
    case GenOptions::Shape::Random:
      for (std::size_t e = 0; e < edges; ++e)
        add(inst.vertex_ids[rng() % n], inst.property_ids[rng() % np],
            inst.vertex_ids[rng() % n]);
      break;
    case GenOptions::Shape::Chain: {
      // one long chain on p0 (diameter n-1), other properties sprinkled
      for (int i = 0; i + 1 < n; ++i)
        add(inst.vertex_ids[i], inst.property_ids[0], inst.vertex_ids[i + 1]);
      for (std::size_t e = n; e < edges; ++e)
        add(inst.vertex_ids[rng() % n], inst.property_ids[1 + rng() % std::max(1, np - 1)],
            inst.vertex_ids[rng() % n]);
      break;
    }
    case GenOptions::Shape::Hierarchy: {
      // forest on p0 with depth >= 3 (child -> parent), cross edges on the
      // remaining properties between random vertices
      int roots = std::max(1, n / 64);
      for (int i = roots; i < n; ++i) {
        int parent = static_cast<int>(rng() % static_cast<std::uint64_t>(i));
        add(inst.vertex_ids[i], inst.property_ids[0], inst.vertex_ids[parent]);
      }
      for (std::size_t e = static_cast<std::size_t>(n); e < edges; ++e)
        add(inst.vertex_ids[rng() % n], inst.property_ids[rng() % np],
            inst.vertex_ids[rng() % n]);
      break;
    }
  }
  return inst;
}

inline std::string to_ntriples(const Instance& inst) {
  std::ostringstream out;
  for (const auto& t : inst.triples)
    out << to_string(inst.dict.decode(t.s)) << " " << to_string(inst.dict.decode(t.p)) << " "
        << to_string(inst.dict.decode(t.o)) << " .\n";
  return out.str();
}

// Random connected queries over a generated instance: plain patterns plus
// property paths with modifiers, inversion and '/'-chains.
struct QueryGenOptions {
  int max_patterns = 6;
  int max_reach = 3;
};

inline std::string generate_query(std::mt19937_64& rng, const Instance& inst,
                                  const QueryGenOptions& opt = {}) {
  const int n_patterns = 1 + static_cast<int>(rng() % opt.max_patterns);
  int reach_budget = opt.max_reach;
  std::vector<std::string> vars;
  int var_counter = 0;

  auto fresh_var = [&]() {
    std::string v = "v" + std::to_string(var_counter++);
    vars.push_back(v);
    return "?" + v;
  };
  auto existing_var = [&]() { return "?" + vars[rng() % vars.size()]; };
  auto random_vertex = [&]() {
    return "<" + inst.dict.decode(inst.vertex_ids[rng() % inst.vertex_ids.size()]).lexical + ">";
  };
  auto random_property = [&]() {
    return inst.dict.decode(inst.property_ids[rng() % inst.property_ids.size()]).lexical;
  };

  std::ostringstream body;
  for (int i = 0; i < n_patterns; ++i) {
    // endpoints: reuse a variable to stay connected; the first pattern may
    // use anything
    std::string subject, object;
    bool can_reuse = !vars.empty();
    auto endpoint = [&](bool must_reuse) -> std::string {
      int roll = static_cast<int>(rng() % 10);
      if (must_reuse) return existing_var();
      if (roll < 5) return can_reuse ? existing_var() : fresh_var();
      if (roll < 8) return fresh_var();
      return random_vertex();
    };
    subject = endpoint(false);
    bool subject_is_var = subject[0] == '?';
    object = endpoint(can_reuse && !subject_is_var);
    if (i > 0 && subject[0] != '?' && object[0] != '?') subject = existing_var();

    // path: 1-2 atoms; modifiers spend the reach budget
    int atoms = 1 + static_cast<int>(rng() % 2);
    std::string path;
    for (int a = 0; a < atoms; ++a) {
      if (a) path += "/";
      bool invert = rng() % 8 == 0;
      std::string atom = "<" + random_property() + ">";
      if (invert) {
        path += "^" + atom;
        continue;
      }
      if (reach_budget > 0 && rng() % 3 == 0) {
        const char* mods[] = {"*", "+", "?"};
        atom += mods[rng() % 3];
        --reach_budget;
      }
      path += atom;
    }
    body << " " << subject << " " << path << " " << object << " .";
  }
  return "SELECT * WHERE {" + body.str() + " }";
}

}  // namespace pathjoin
