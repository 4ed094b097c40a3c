#pragma once

#include <algorithm>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pathjoin/errors.hpp"
#include "pathjoin/partition.hpp"
#include "pathjoin/rdf.hpp"
#include "pathjoin/triple_index.hpp"

namespace pathjoin {

// Per-property, per-partition reachability index. Build order:
//   extract_property_subgraph -> compute_boundaries -> compress_boundaries
//   -> build_bipartite_summary -> (exchange summaries once) ->
//   assemble_compound (SCC-condensed).
// Query time is read-only: local_set_reach / reach_frontier / out_neighbors.

// All p-labeled edges with at least one endpoint owned by the partition
// (incident cut edges included; helpers that need the vertex-induced local
// subgraph filter to locally-owned endpoints).
struct PropertySubgraph {
  TermId property = 0;
  int partition = 0;
  std::vector<std::pair<TermId, TermId>> edges;  // sorted, unique
};

inline PropertySubgraph extract_property_subgraph(const PartitionIndexes& idx, TermId p,
                                                  int partition) {
  PropertySubgraph g;
  g.property = p;
  g.partition = partition;
  ScanPattern key{{p}};
  for (const auto& row : idx.index(Permutation::PSO).scan(key))
    g.edges.emplace_back(row[1], row[2]);  // rows are (p,s,o)
  for (const auto& row : idx.index(Permutation::POS).scan(key))
    g.edges.emplace_back(row[2], row[1]);  // rows are (p,o,s)
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

// In-boundaries: local vertices receiving a p-edge from another partition.
// Out-boundaries: local vertices sending a p-edge to another partition.
struct BoundarySets {
  std::vector<TermId> in_boundary;   // sorted
  std::vector<TermId> out_boundary;  // sorted
};

inline BoundarySets compute_boundaries(const PropertySubgraph& g,
                                       const PartitionAssignment& assign) {
  BoundarySets b;
  for (const auto& [u, v] : g.edges) {
    int ou = assign.owner_of(u), ov = assign.owner_of(v);
    if (ou != ov) {
      if (ov == g.partition) b.in_boundary.push_back(v);
      if (ou == g.partition) b.out_boundary.push_back(u);
    }
  }
  auto dedup = [](std::vector<TermId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedup(b.in_boundary);
  dedup(b.out_boundary);
  return b;
}

namespace detail {

// Compact directed graph over an arbitrary TermId vertex set.
struct LocalGraph {
  std::vector<TermId> verts;  // sorted unique
  std::vector<std::uint32_t> adj_start;
  std::vector<std::uint32_t> adj;

  int pos_of(TermId v) const {
    auto it = std::lower_bound(verts.begin(), verts.end(), v);
    if (it == verts.end() || *it != v) return -1;
    return static_cast<int>(it - verts.begin());
  }

  static LocalGraph build(std::span<const std::pair<TermId, TermId>> edges,
                          std::span<const TermId> extra_verts) {
    LocalGraph g;
    g.verts.reserve(edges.size() * 2 + extra_verts.size());
    for (const auto& [u, v] : edges) {
      g.verts.push_back(u);
      g.verts.push_back(v);
    }
    g.verts.insert(g.verts.end(), extra_verts.begin(), extra_verts.end());
    std::sort(g.verts.begin(), g.verts.end());
    g.verts.erase(std::unique(g.verts.begin(), g.verts.end()), g.verts.end());
    std::vector<std::pair<std::uint32_t, std::uint32_t>> es;
    es.reserve(edges.size());
    for (const auto& [u, v] : edges)
      es.emplace_back(static_cast<std::uint32_t>(g.pos_of(u)),
                      static_cast<std::uint32_t>(g.pos_of(v)));
    std::sort(es.begin(), es.end());
    es.erase(std::unique(es.begin(), es.end()), es.end());
    g.adj_start.assign(g.verts.size() + 1, 0);
    for (const auto& e : es) ++g.adj_start[e.first + 1];
    for (std::size_t i = 1; i < g.adj_start.size(); ++i) g.adj_start[i] += g.adj_start[i - 1];
    g.adj.resize(es.size());
    std::vector<std::uint32_t> fill(g.verts.size(), 0);
    for (const auto& e : es) g.adj[g.adj_start[e.first] + fill[e.first]++] = e.second;
    return g;
  }
};

// Iterative Tarjan SCC. Component ids come out in reverse topological
// order: for any edge u->v across components, comp(v) < comp(u).
struct Condensation {
  std::vector<std::uint32_t> comp_of;
  std::uint32_t comp_count = 0;
  std::vector<std::uint32_t> dag_start;
  std::vector<std::uint32_t> dag_adj;
};

inline Condensation condense(std::size_t n, const std::vector<std::uint32_t>& adj_start,
                             const std::vector<std::uint32_t>& adj) {
  Condensation c;
  c.comp_of.assign(n, 0);
  constexpr std::uint32_t kUnset = 0xffffffffu;
  std::vector<std::uint32_t> index(n, kUnset), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::uint32_t> stack;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> call;  // (vertex, next edge offset)
  std::uint32_t counter = 0;

  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      std::uint32_t v = call.back().first;
      if (call.back().second == 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      bool descended = false;
      while (call.back().second < adj_start[v + 1] - adj_start[v]) {
        std::uint32_t w = adj[adj_start[v] + call.back().second];
        ++call.back().second;
        if (index[w] == kUnset) {
          call.emplace_back(w, 0);
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        while (true) {
          std::uint32_t w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          c.comp_of[w] = c.comp_count;
          if (w == v) break;
        }
        ++c.comp_count;
      }
      std::uint32_t finished_low = low[v];
      call.pop_back();
      if (!call.empty()) {
        std::uint32_t parent = call.back().first;
        low[parent] = std::min(low[parent], finished_low);
      }
    }
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> dag_edges;
  for (std::uint32_t v = 0; v < n; ++v) {
    for (std::uint32_t e = adj_start[v]; e < adj_start[v + 1]; ++e) {
      std::uint32_t cu = c.comp_of[v], cv = c.comp_of[adj[e]];
      if (cu != cv) dag_edges.emplace_back(cu, cv);
    }
  }
  std::sort(dag_edges.begin(), dag_edges.end());
  dag_edges.erase(std::unique(dag_edges.begin(), dag_edges.end()), dag_edges.end());
  c.dag_start.assign(c.comp_count + 1, 0);
  for (const auto& e : dag_edges) ++c.dag_start[e.first + 1];
  for (std::size_t i = 1; i < c.dag_start.size(); ++i) c.dag_start[i] += c.dag_start[i - 1];
  c.dag_adj.resize(dag_edges.size());
  std::vector<std::uint32_t> fill(c.comp_count, 0);
  for (const auto& e : dag_edges) c.dag_adj[c.dag_start[e.first] + fill[e.first]++] = e.second;
  return c;
}

inline void merge_sorted(std::vector<std::uint32_t>& dst, const std::vector<std::uint32_t>& src) {
  if (src.empty()) return;
  std::vector<std::uint32_t> out;
  out.reserve(dst.size() + src.size());
  std::set_union(dst.begin(), dst.end(), src.begin(), src.end(), std::back_inserter(out));
  dst = std::move(out);
}

// Per-component reachable "interesting" sets over a condensation whose comp
// ids are in reverse topological order (successors first). own[comp] must be
// sorted.
inline std::vector<std::vector<std::uint32_t>> comp_reach_sets(
    std::uint32_t comp_count, std::span<const std::uint32_t> dag_start,
    std::span<const std::uint32_t> dag_adj, std::vector<std::vector<std::uint32_t>> own) {
  for (std::uint32_t comp = 0; comp < comp_count; ++comp) {
    for (std::uint32_t e = dag_start[comp]; e < dag_start[comp + 1]; ++e)
      merge_sorted(own[comp], own[dag_adj[e]]);
  }
  return own;
}

}  // namespace detail

// Equivalence classes over boundary vertices. In-boundaries merge iff they
// reach identical out-boundary sets within the local subgraph; out-boundaries
// iff reached by identical in-boundary sets. Vertices that are both in- and
// out-boundaries are carried as uncompressed singletons.
struct VirtualClass {
  bool in_role = false;
  bool out_role = false;
  std::vector<TermId> members;  // sorted
};

struct BoundaryCompression {
  std::vector<VirtualClass> classes;
  // Forward out-boundary signature of each in-role class (shared by all its
  // members); used to derive the bipartite summary without a second pass.
  std::vector<std::vector<TermId>> class_out_signature;
};

namespace detail {

// Shared machinery: condensation of the locally-induced subgraph plus
// per-vertex forward/backward boundary signatures.
struct LocalReach {
  LocalGraph graph;
  Condensation cond;
  std::vector<std::vector<std::uint32_t>> fwd;  // reachable out-boundary indexes per comp
  std::vector<std::vector<std::uint32_t>> bwd;  // reaching in-boundary indexes per comp
  std::vector<TermId> outs;                     // sorted out-boundary ids
  std::vector<TermId> ins;                      // sorted in-boundary ids
};

inline LocalReach local_reach(const PropertySubgraph& g, const BoundarySets& b,
                              const PartitionAssignment& assign) {
  LocalReach lr;
  std::vector<std::pair<TermId, TermId>> local_edges;
  std::vector<TermId> owned;
  for (const auto& [u, v] : g.edges) {
    bool lu = assign.owner_of(u) == g.partition;
    bool lv = assign.owner_of(v) == g.partition;
    if (lu && lv) local_edges.emplace_back(u, v);
    if (lu) owned.push_back(u);
    if (lv) owned.push_back(v);
  }
  lr.graph = LocalGraph::build(local_edges, owned);
  lr.cond = condense(lr.graph.verts.size(), lr.graph.adj_start, lr.graph.adj);
  lr.outs = b.out_boundary;
  lr.ins = b.in_boundary;

  std::vector<std::vector<std::uint32_t>> own_out(lr.cond.comp_count);
  for (std::size_t i = 0; i < lr.outs.size(); ++i) {
    int pos = lr.graph.pos_of(lr.outs[i]);
    if (pos >= 0) own_out[lr.cond.comp_of[pos]].push_back(static_cast<std::uint32_t>(i));
  }
  for (auto& v : own_out) std::sort(v.begin(), v.end());
  lr.fwd = comp_reach_sets(lr.cond.comp_count, lr.cond.dag_start, lr.cond.dag_adj,
                           std::move(own_out));

  // backward reach: condense the reversed graph (comp structure identical,
  // but the DP needs reverse-topological order of the reversed DAG, i.e.
  // descending comp ids with predecessor sets).
  std::vector<std::vector<std::uint32_t>> bwd(lr.cond.comp_count);
  for (std::size_t i = 0; i < lr.ins.size(); ++i) {
    int pos = lr.graph.pos_of(lr.ins[i]);
    if (pos >= 0) bwd[lr.cond.comp_of[pos]].push_back(static_cast<std::uint32_t>(i));
  }
  for (auto& v : bwd) std::sort(v.begin(), v.end());
  for (std::uint32_t comp = lr.cond.comp_count; comp-- > 0;) {
    for (std::uint32_t e = lr.cond.dag_start[comp]; e < lr.cond.dag_start[comp + 1]; ++e)
      merge_sorted(bwd[lr.cond.dag_adj[e]], bwd[comp]);
  }
  lr.bwd = std::move(bwd);
  return lr;
}

}  // namespace detail

inline BoundaryCompression compress_boundaries(const PropertySubgraph& g, const BoundarySets& b,
                                               const PartitionAssignment& assign) {
  detail::LocalReach lr = detail::local_reach(g, b, assign);
  BoundaryCompression out;

  std::vector<TermId> both;
  std::set_intersection(b.in_boundary.begin(), b.in_boundary.end(), b.out_boundary.begin(),
                        b.out_boundary.end(), std::back_inserter(both));
  auto is_both = [&](TermId v) {
    return std::binary_search(both.begin(), both.end(), v);
  };

  auto out_sig_of = [&](TermId v) {
    std::vector<TermId> sig;
    int pos = lr.graph.pos_of(v);
    if (pos >= 0) {
      for (std::uint32_t oi : lr.fwd[lr.cond.comp_of[pos]]) sig.push_back(lr.outs[oi]);
    }
    return sig;  // sorted: fwd sets are sorted index sets over sorted outs
  };

  // both in- and out-boundaries: singletons, omitted from merging
  for (TermId v : both) {
    out.classes.push_back({true, true, {v}});
    out.class_out_signature.push_back(out_sig_of(v));
  }
  // in-only, grouped by forward out-boundary signature
  std::map<std::vector<std::uint32_t>, std::vector<TermId>> in_groups;
  for (TermId v : b.in_boundary) {
    if (is_both(v)) continue;
    int pos = lr.graph.pos_of(v);
    std::vector<std::uint32_t> key = pos >= 0 ? lr.fwd[lr.cond.comp_of[pos]]
                                              : std::vector<std::uint32_t>{};
    in_groups[std::move(key)].push_back(v);
  }
  std::vector<std::pair<TermId, std::pair<std::vector<TermId>, std::vector<TermId>>>> in_classes;
  for (auto& [key, members] : in_groups) {
    std::sort(members.begin(), members.end());
    std::vector<TermId> sig;
    for (std::uint32_t oi : key) sig.push_back(lr.outs[oi]);
    in_classes.push_back({members.front(), {members, std::move(sig)}});
  }
  std::sort(in_classes.begin(), in_classes.end(),
            [](const auto& a, const auto& b2) { return a.first < b2.first; });
  for (auto& [first, rest] : in_classes) {
    (void)first;
    out.classes.push_back({true, false, std::move(rest.first)});
    out.class_out_signature.push_back(std::move(rest.second));
  }
  // out-only, grouped by backward in-boundary signature
  std::map<std::vector<std::uint32_t>, std::vector<TermId>> out_groups;
  for (TermId v : b.out_boundary) {
    if (is_both(v)) continue;
    int pos = lr.graph.pos_of(v);
    std::vector<std::uint32_t> key = pos >= 0 ? lr.bwd[lr.cond.comp_of[pos]]
                                              : std::vector<std::uint32_t>{};
    out_groups[std::move(key)].push_back(v);
  }
  std::vector<std::vector<TermId>> out_classes;
  for (auto& [key, members] : out_groups) {
    (void)key;
    std::sort(members.begin(), members.end());
    out_classes.push_back(std::move(members));
  }
  std::sort(out_classes.begin(), out_classes.end(),
            [](const auto& a, const auto& b2) { return a.front() < b2.front(); });
  for (auto& members : out_classes) {
    out.classes.push_back({false, true, std::move(members)});
    out.class_out_signature.emplace_back();
  }
  return out;
}

// In->out transitive-reachability summary of one partition at class
// granularity, plus the partition's outgoing cut edges (needed by peers to
// assemble the full cut).
struct BipartiteSummary {
  TermId property = 0;
  int source_partition = 0;
  std::vector<VirtualClass> classes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // in-class -> out-class
  std::vector<std::pair<TermId, TermId>> out_cut_edges;        // owned u -> remote v
};

inline BipartiteSummary build_bipartite_summary(const PropertySubgraph& g, const BoundarySets& b,
                                                const BoundaryCompression& comp,
                                                const PartitionAssignment& assign) {
  BipartiteSummary s;
  s.property = g.property;
  s.source_partition = g.partition;
  s.classes = comp.classes;
  for (std::size_t ci = 0; ci < comp.classes.size(); ++ci) {
    if (!comp.classes[ci].in_role) continue;
    const auto& sig = comp.class_out_signature[ci];
    if (sig.empty()) continue;
    for (std::size_t cj = 0; cj < comp.classes.size(); ++cj) {
      if (!comp.classes[cj].out_role || ci == cj) continue;
      const auto& members = comp.classes[cj].members;
      bool hit = false;
      for (TermId m : members) {
        if (std::binary_search(sig.begin(), sig.end(), m)) {
          hit = true;
          break;
        }
      }
      if (hit) s.edges.emplace_back(static_cast<std::uint32_t>(ci), static_cast<std::uint32_t>(cj));
    }
  }
  for (const auto& [u, v] : g.edges) {
    if (assign.owner_of(u) == g.partition && assign.owner_of(v) != g.partition)
      s.out_cut_edges.emplace_back(u, v);
  }
  (void)b;
  return s;
}

// One reached in-virtual vertex of a remote partition, annotated with the
// members actually reached (class-level marks alone would over-approximate:
// two in-boundaries can share a forward signature yet differ on which local
// targets they reach).
struct FrontierClassRef {
  std::int32_t partition = 0;
  std::uint32_t class_idx = 0;
  std::vector<TermId> members;
};

using Frontier = std::vector<FrontierClassRef>;

// SCC-condensed compound graph of one (property, partition): the local
// subgraph, the full cut with real endpoints, and every remote partition's
// class-level summary spliced in through member<->class link edges.
struct CompoundDag {
  TermId property = 0;
  int partition = 0;
  int cluster_size = 1;

  std::vector<TermId> real_ids;  // sorted: local V^p plus all cut endpoints
  struct ClassNode {
    std::int32_t owner = 0;
    std::uint32_t class_idx = 0;
    std::uint8_t in_role = 0;
    std::uint8_t out_role = 0;
    std::vector<TermId> members;
  };
  std::vector<ClassNode> foreign_classes;
  std::vector<VirtualClass> own_classes;

  // node-level graph: nodes [0, real_ids.size()) are real vertices,
  // the rest are foreign class nodes in foreign_classes order
  std::vector<std::uint32_t> node_start;
  std::vector<std::uint32_t> node_adj;

  std::vector<std::uint32_t> comp_of;
  std::uint32_t comp_count = 0;
  std::vector<std::uint32_t> dag_start;  // acyclic; successors have smaller comp ids
  std::vector<std::uint32_t> dag_adj;

  std::vector<TermId> local_vertices;  // owned V^p, sorted
  BoundarySets boundaries;

  std::unordered_map<TermId, std::pair<std::int32_t, std::uint32_t>> foreign_in_class;

  std::size_t node_count() const { return real_ids.size() + foreign_classes.size(); }

  int node_of(TermId v) const {
    auto it = std::lower_bound(real_ids.begin(), real_ids.end(), v);
    if (it == real_ids.end() || *it != v) return -1;
    return static_cast<int>(it - real_ids.begin());
  }

  bool knows(TermId v) const { return node_of(v) >= 0; }

  bool is_local_vertex(TermId v) const {
    return std::binary_search(local_vertices.begin(), local_vertices.end(), v);
  }

  // Direct p-successors of a real vertex (length-1 paths for `?`). Real
  // successors only: class nodes are summary plumbing, never edge targets.
  std::vector<TermId> out_neighbors(TermId s) const {
    std::vector<TermId> out;
    int n = node_of(s);
    if (n < 0) return out;
    for (std::uint32_t e = node_start[n]; e < node_start[n + 1]; ++e) {
      std::uint32_t w = node_adj[e];
      if (w < real_ids.size()) out.push_back(real_ids[w]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Multi-source, multi-target reachability over the compound graph. A
  // vertex trivially reaches itself; callers enforce the `+` exclusion.
  // Ids unknown to the dag contribute no pairs.
  std::vector<std::pair<TermId, TermId>> local_set_reach(std::span<const TermId> sources,
                                                         std::span<const TermId> targets) const {
    std::vector<std::pair<TermId, TermId>> result;
    if (comp_count == 0) return result;
    std::vector<std::vector<std::uint32_t>> own(comp_count);
    std::vector<TermId> tgt;
    for (TermId t : targets) {
      int n = node_of(t);
      if (n < 0) continue;
      tgt.push_back(t);
    }
    std::sort(tgt.begin(), tgt.end());
    tgt.erase(std::unique(tgt.begin(), tgt.end()), tgt.end());
    if (tgt.empty()) return result;
    for (std::size_t i = 0; i < tgt.size(); ++i)
      own[comp_of[node_of(tgt[i])]].push_back(static_cast<std::uint32_t>(i));
    for (auto& v : own) std::sort(v.begin(), v.end());
    auto reach = detail::comp_reach_sets(comp_count, dag_start, dag_adj, std::move(own));
    std::vector<TermId> srcs(sources.begin(), sources.end());
    std::sort(srcs.begin(), srcs.end());
    srcs.erase(std::unique(srcs.begin(), srcs.end()), srcs.end());
    for (TermId s : srcs) {
      int n = node_of(s);
      if (n < 0) continue;
      for (std::uint32_t ti : reach[comp_of[n]]) result.emplace_back(s, tgt[ti]);
    }
    return result;
  }

  // Per-source reached remote in-virtual vertices, each annotated with the
  // reached members. Sources must be locally owned; unknown ids yield empty
  // frontiers.
  std::vector<std::pair<TermId, Frontier>> reach_frontier(std::span<const TermId> sources) const {
    std::vector<std::pair<TermId, Frontier>> result;
    std::vector<TermId> srcs(sources.begin(), sources.end());
    std::sort(srcs.begin(), srcs.end());
    srcs.erase(std::unique(srcs.begin(), srcs.end()), srcs.end());
    if (comp_count == 0 || foreign_in_class.empty()) {
      for (TermId s : srcs) result.emplace_back(s, Frontier{});
      return result;
    }
    // interesting = foreign real in-boundary vertices
    std::vector<TermId> cand;
    cand.reserve(foreign_in_class.size());
    for (const auto& [b, loc] : foreign_in_class) {
      (void)loc;
      cand.push_back(b);
    }
    std::sort(cand.begin(), cand.end());
    std::vector<std::vector<std::uint32_t>> own(comp_count);
    for (std::size_t i = 0; i < cand.size(); ++i) {
      int n = node_of(cand[i]);
      if (n >= 0) own[comp_of[n]].push_back(static_cast<std::uint32_t>(i));
    }
    for (auto& v : own) std::sort(v.begin(), v.end());
    auto reach = detail::comp_reach_sets(comp_count, dag_start, dag_adj, std::move(own));
    for (TermId s : srcs) {
      Frontier fr;
      int n = node_of(s);
      if (n >= 0) {
        std::map<std::pair<std::int32_t, std::uint32_t>, std::vector<TermId>> grouped;
        for (std::uint32_t ci : reach[comp_of[n]]) {
          TermId b = cand[ci];
          grouped[foreign_in_class.at(b)].push_back(b);
        }
        for (auto& [key, members] : grouped) {
          std::sort(members.begin(), members.end());
          fr.push_back({key.first, key.second, std::move(members)});
        }
      }
      result.emplace_back(s, std::move(fr));
    }
    return result;
  }
};

// Merges the local subgraph, the full cut and all remote summaries, then
// condenses. Requires one summary from every other partition.
inline CompoundDag assemble_compound(const PropertySubgraph& local, const BoundarySets& bounds,
                                     const BoundaryCompression& own_comp,
                                     std::span<const BipartiteSummary> remote,
                                     const PartitionAssignment& assign) {
  const int k = assign.partitions();
  std::vector<const BipartiteSummary*> by_partition(static_cast<std::size_t>(k), nullptr);
  for (const auto& s : remote) {
    if (s.property != local.property || s.source_partition == local.partition) continue;
    by_partition[s.source_partition] = &s;
  }
  for (int j = 0; j < k; ++j) {
    if (j != local.partition && by_partition[j] == nullptr)
      throw StoreError("missing bipartite summary from partition " + std::to_string(j));
  }

  CompoundDag dag;
  dag.property = local.property;
  dag.partition = local.partition;
  dag.cluster_size = k;
  dag.boundaries = bounds;
  dag.own_classes = own_comp.classes;

  // real vertex universe and real-real edges: local subgraph + full cut
  std::vector<std::pair<TermId, TermId>> real_edges = local.edges;
  for (int j = 0; j < k; ++j) {
    if (!by_partition[j]) continue;
    for (const auto& e : by_partition[j]->out_cut_edges) real_edges.push_back(e);
  }
  std::sort(real_edges.begin(), real_edges.end());
  real_edges.erase(std::unique(real_edges.begin(), real_edges.end()), real_edges.end());

  for (const auto& [u, v] : real_edges) {
    dag.real_ids.push_back(u);
    dag.real_ids.push_back(v);
  }
  for (const auto& [u, v] : local.edges) {
    if (assign.owner_of(u) == local.partition) dag.local_vertices.push_back(u);
    if (assign.owner_of(v) == local.partition) dag.local_vertices.push_back(v);
  }
  std::sort(dag.local_vertices.begin(), dag.local_vertices.end());
  dag.local_vertices.erase(std::unique(dag.local_vertices.begin(), dag.local_vertices.end()),
                           dag.local_vertices.end());
  dag.real_ids.insert(dag.real_ids.end(), dag.local_vertices.begin(), dag.local_vertices.end());
  std::sort(dag.real_ids.begin(), dag.real_ids.end());
  dag.real_ids.erase(std::unique(dag.real_ids.begin(), dag.real_ids.end()), dag.real_ids.end());

  for (int j = 0; j < k; ++j) {
    if (!by_partition[j]) continue;
    const auto& s = *by_partition[j];
    for (std::size_t ci = 0; ci < s.classes.size(); ++ci) {
      const auto& c = s.classes[ci];
      dag.foreign_classes.push_back({j, static_cast<std::uint32_t>(ci),
                                     static_cast<std::uint8_t>(c.in_role),
                                     static_cast<std::uint8_t>(c.out_role), c.members});
      if (c.in_role) {
        for (TermId m : c.members)
          dag.foreign_in_class[m] = {j, static_cast<std::uint32_t>(ci)};
      }
    }
  }

  const std::size_t n_real = dag.real_ids.size();
  const std::size_t n = n_real + dag.foreign_classes.size();
  auto real_node = [&](TermId v) { return static_cast<std::uint32_t>(dag.node_of(v)); };

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(real_edges.size() + dag.foreign_classes.size() * 2);
  for (const auto& [u, v] : real_edges) edges.emplace_back(real_node(u), real_node(v));

  // splice class nodes: member -> in-class, out-class -> member, plus the
  // class-level summary edges
  std::vector<std::uint32_t> class_base(static_cast<std::size_t>(k), 0);
  {
    std::uint32_t base = static_cast<std::uint32_t>(n_real);
    for (int j = 0; j < k; ++j) {
      class_base[j] = base;
      if (by_partition[j]) base += static_cast<std::uint32_t>(by_partition[j]->classes.size());
    }
  }
  for (std::size_t fc = 0; fc < dag.foreign_classes.size(); ++fc) {
    const auto& c = dag.foreign_classes[fc];
    std::uint32_t cnode = class_base[c.owner] + c.class_idx;
    for (TermId m : c.members) {
      int mn = dag.node_of(m);
      if (mn < 0) continue;  // member not on any cut edge visible here
      if (c.in_role) edges.emplace_back(static_cast<std::uint32_t>(mn), cnode);
      if (c.out_role) edges.emplace_back(cnode, static_cast<std::uint32_t>(mn));
    }
  }
  for (int j = 0; j < k; ++j) {
    if (!by_partition[j]) continue;
    for (const auto& [a, b] : by_partition[j]->edges)
      edges.emplace_back(class_base[j] + a, class_base[j] + b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  dag.node_start.assign(n + 1, 0);
  for (const auto& e : edges) ++dag.node_start[e.first + 1];
  for (std::size_t i = 1; i < dag.node_start.size(); ++i) dag.node_start[i] += dag.node_start[i - 1];
  dag.node_adj.resize(edges.size());
  std::vector<std::uint32_t> fill(n, 0);
  for (const auto& e : edges) dag.node_adj[dag.node_start[e.first] + fill[e.first]++] = e.second;

  auto cond = detail::condense(n, dag.node_start, dag.node_adj);
  dag.comp_of = std::move(cond.comp_of);
  dag.comp_count = cond.comp_count;
  dag.dag_start = std::move(cond.dag_start);
  dag.dag_adj = std::move(cond.dag_adj);
  return dag;
}

// ---- binary snapshot (magic PJRX, version 1) ----

inline void save_compound(std::ostream& out, const CompoundDag& d) {
  out.write("PJRX", 4);
  detail::write_pod<std::uint32_t>(out, 1);
  detail::write_pod<std::uint32_t>(out, d.property);
  detail::write_pod<std::int32_t>(out, d.partition);
  detail::write_pod<std::int32_t>(out, d.cluster_size);
  auto write_ids = [&](const std::vector<TermId>& v) {
    detail::write_pod<std::uint64_t>(out, v.size());
    if (!v.empty()) out.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(TermId));
  };
  auto write_u32s = [&](const std::vector<std::uint32_t>& v) {
    detail::write_pod<std::uint64_t>(out, v.size());
    if (!v.empty())
      out.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(std::uint32_t));
  };
  write_ids(d.real_ids);
  detail::write_pod<std::uint64_t>(out, d.foreign_classes.size());
  for (const auto& c : d.foreign_classes) {
    detail::write_pod<std::int32_t>(out, c.owner);
    detail::write_pod<std::uint32_t>(out, c.class_idx);
    detail::write_pod<std::uint8_t>(out, c.in_role);
    detail::write_pod<std::uint8_t>(out, c.out_role);
    write_ids(c.members);
  }
  detail::write_pod<std::uint64_t>(out, d.own_classes.size());
  for (const auto& c : d.own_classes) {
    detail::write_pod<std::uint8_t>(out, c.in_role);
    detail::write_pod<std::uint8_t>(out, c.out_role);
    write_ids(c.members);
  }
  write_u32s(d.node_start);
  write_u32s(d.node_adj);
  write_u32s(d.comp_of);
  detail::write_pod<std::uint32_t>(out, d.comp_count);
  write_u32s(d.dag_start);
  write_u32s(d.dag_adj);
  write_ids(d.local_vertices);
  write_ids(d.boundaries.in_boundary);
  write_ids(d.boundaries.out_boundary);
}

inline CompoundDag load_compound(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PJRX", 4) != 0) throw StoreError("bad reach snapshot magic");
  if (detail::read_pod<std::uint32_t>(in) != 1)
    throw StoreError("unsupported reach snapshot version");
  CompoundDag d;
  d.property = detail::read_pod<std::uint32_t>(in);
  d.partition = detail::read_pod<std::int32_t>(in);
  d.cluster_size = detail::read_pod<std::int32_t>(in);
  auto read_ids = [&](std::vector<TermId>& v) {
    v.resize(detail::read_pod<std::uint64_t>(in));
    if (!v.empty()) {
      in.read(reinterpret_cast<char*>(v.data()), v.size() * sizeof(TermId));
      if (!in) throw StoreError("reach snapshot truncated");
    }
  };
  auto read_u32s = [&](std::vector<std::uint32_t>& v) {
    v.resize(detail::read_pod<std::uint64_t>(in));
    if (!v.empty()) {
      in.read(reinterpret_cast<char*>(v.data()), v.size() * sizeof(std::uint32_t));
      if (!in) throw StoreError("reach snapshot truncated");
    }
  };
  read_ids(d.real_ids);
  d.foreign_classes.resize(detail::read_pod<std::uint64_t>(in));
  for (auto& c : d.foreign_classes) {
    c.owner = detail::read_pod<std::int32_t>(in);
    c.class_idx = detail::read_pod<std::uint32_t>(in);
    c.in_role = detail::read_pod<std::uint8_t>(in);
    c.out_role = detail::read_pod<std::uint8_t>(in);
    read_ids(c.members);
    if (c.in_role) {
      for (TermId m : c.members) d.foreign_in_class[m] = {c.owner, c.class_idx};
    }
  }
  d.own_classes.resize(detail::read_pod<std::uint64_t>(in));
  for (auto& c : d.own_classes) {
    c.in_role = detail::read_pod<std::uint8_t>(in);
    c.out_role = detail::read_pod<std::uint8_t>(in);
    read_ids(c.members);
  }
  read_u32s(d.node_start);
  read_u32s(d.node_adj);
  read_u32s(d.comp_of);
  d.comp_count = detail::read_pod<std::uint32_t>(in);
  read_u32s(d.dag_start);
  read_u32s(d.dag_adj);
  read_ids(d.local_vertices);
  read_ids(d.boundaries.in_boundary);
  read_ids(d.boundaries.out_boundary);
  return d;
}

}  // namespace pathjoin
