#pragma once

// Test-side helpers: random instance builders and brute-force reference
// computations (independent of the engine's index / runtime code paths).

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "pathjoin/partition.hpp"
#include "pathjoin/rdf.hpp"

namespace testutil {

using pathjoin::EncodedTriple;
using pathjoin::PartitionAssignment;
using pathjoin::ShardedTriple;
using pathjoin::TermId;

inline std::vector<EncodedTriple> random_triples(std::mt19937_64& rng, int vertices,
                                                 int properties, int edges) {
  std::vector<EncodedTriple> out;
  out.reserve(edges);
  for (int i = 0; i < edges; ++i) {
    TermId s = static_cast<TermId>(rng() % vertices);
    TermId o = static_cast<TermId>(rng() % vertices);
    TermId p = static_cast<TermId>(vertices + rng() % properties);
    out.push_back({s, p, o});
  }
  return out;
}

inline std::vector<ShardedTriple> shard_all(const std::vector<EncodedTriple>& triples,
                                            const PartitionAssignment& assign) {
  std::vector<ShardedTriple> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.push_back(pathjoin::assign_custom(t, assign));
  return out;
}

inline std::vector<ShardedTriple> shard_for(const std::vector<EncodedTriple>& triples,
                                            const PartitionAssignment& assign, int partition) {
  std::vector<ShardedTriple> out;
  for (const auto& t : triples) {
    auto st = pathjoin::assign_custom(t, assign);
    if (st.subject_owner == partition || st.object_owner == partition) out.push_back(st);
  }
  return out;
}

// Exact transitive closure of the p-induced subgraph via per-source BFS,
// self-pairs included (zero-length paths).
inline std::set<std::pair<TermId, TermId>> bfs_closure(const std::vector<EncodedTriple>& triples,
                                                       TermId p) {
  std::vector<std::pair<TermId, TermId>> edges;
  std::set<TermId> verts;
  for (const auto& t : triples) {
    if (t.p != p) continue;
    edges.emplace_back(t.s, t.o);
    verts.insert(t.s);
    verts.insert(t.o);
  }
  std::set<std::pair<TermId, TermId>> closure;
  for (TermId src : verts) {
    std::set<TermId> seen{src};
    std::vector<TermId> frontier{src};
    while (!frontier.empty()) {
      std::vector<TermId> next;
      for (TermId u : frontier) {
        for (const auto& [a, b] : edges) {
          if (a == u && seen.insert(b).second) next.push_back(b);
        }
      }
      frontier = std::move(next);
    }
    for (TermId t : seen) closure.emplace(src, t);
  }
  return closure;
}

}  // namespace testutil
