#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pathjoin/errors.hpp"
#include "pathjoin/rdf.hpp"
#include "pathjoin/triple_index.hpp"

namespace pathjoin {

// Index statistics for the cost model: exact cardinalities of single-key and
// pair-key relations, exact pairwise join selectivities per role, and
// sampled (or exhaustive) per-property reachability selectivities.

enum class JoinRole : std::uint8_t { SS = 0, SO = 1, OS = 2, OO = 3 };

inline const char* name_of(JoinRole r) {
  static const char* names[] = {"ss", "so", "os", "oo"};
  return names[static_cast<int>(r)];
}

inline std::uint64_t pack_pair(TermId a, TermId b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct StatsCatalog {
  std::uint64_t total_triples = 0;  // distinct
  DataGraphMeta meta;
  std::vector<std::pair<TermId, std::uint64_t>> card_s, card_p, card_o;          // sorted
  std::vector<std::pair<std::uint64_t, std::uint64_t>> card_so, card_ps, card_po;  // sorted
  std::map<std::tuple<TermId, TermId, int>, double> join_sel;
  std::map<TermId, double> reach_sel;
  std::uint64_t sample_size = 10000;
  std::uint64_t sample_seed = 42;

  template <typename K>
  static std::uint64_t lookup(const std::vector<std::pair<K, std::uint64_t>>& v, K key) {
    auto it = std::lower_bound(v.begin(), v.end(), key,
                               [](const auto& a, K k) { return a.first < k; });
    if (it == v.end() || it->first != key) return 0;
    return it->second;
  }

  std::uint64_t card_subject(TermId s) const { return lookup(card_s, s); }
  std::uint64_t card_property(TermId p) const { return lookup(card_p, p); }
  std::uint64_t card_object(TermId o) const { return lookup(card_o, o); }
  std::uint64_t card_pair_so(TermId s, TermId o) const { return lookup(card_so, pack_pair(s, o)); }
  std::uint64_t card_pair_ps(TermId p, TermId s) const { return lookup(card_ps, pack_pair(p, s)); }
  std::uint64_t card_pair_po(TermId p, TermId o) const { return lookup(card_po, pack_pair(p, o)); }

  double sel_join(TermId pi, TermId pj, JoinRole role) const {
    auto it = join_sel.find({pi, pj, static_cast<int>(role)});
    return it == join_sel.end() ? 0.0 : it->second;
  }

  double sel_reach(TermId p) const {
    auto it = reach_sel.find(p);
    return it == reach_sel.end() ? 0.0 : it->second;
  }

  // Exact-match cardinality of a triple pattern's constants.
  double pattern_card(std::optional<TermId> s, std::optional<TermId> p,
                      std::optional<TermId> o) const {
    for (auto c : {s, p, o})
      if (c && *c == kInvalidTerm) return 0.0;
    int n = int(s.has_value()) + int(p.has_value()) + int(o.has_value());
    switch (n) {
      case 0:
        return static_cast<double>(total_triples);
      case 1:
        if (s) return static_cast<double>(card_subject(*s));
        if (p) return static_cast<double>(card_property(*p));
        return static_cast<double>(card_object(*o));
      case 2:
        if (s && o) return static_cast<double>(card_pair_so(*s, *o));
        if (p && s) return static_cast<double>(card_pair_ps(*p, *s));
        return static_cast<double>(card_pair_po(*p, *o));
      default: {
        std::uint64_t m = std::min({card_pair_ps(*p, *s), card_pair_po(*p, *o),
                                    card_pair_so(*s, *o)});
        return m > 0 ? 1.0 : 0.0;
      }
    }
  }
};

// ---- per-partition fragments, summed at the master ----

struct StatsFragment {
  std::unordered_map<TermId, std::uint64_t> s, p, o;
  std::unordered_map<std::uint64_t, std::uint64_t> so, ps, po;
  // per property: (value, count) for locally-owned join values
  std::map<TermId, std::vector<std::pair<TermId, std::uint64_t>>> subj_counts, obj_counts;
};

inline StatsFragment compute_cardinalities(const PartitionIndexes& idx) {
  StatsFragment f;
  // each distinct triple is counted once globally via its subject-owned copy
  for (const auto& row : idx.index(Permutation::SPO).rows) {
    TermId s = row[0], p = row[1], o = row[2];
    ++f.s[s];
    ++f.p[p];
    ++f.o[o];
    ++f.so[pack_pair(s, o)];
    ++f.ps[pack_pair(p, s)];
    ++f.po[pack_pair(p, o)];
  }
  // join-value multiplicities: subject side from the subject-owned shard,
  // object side from the object-owned shard, so every value is counted at
  // its owner exactly once
  auto runs = [](const std::vector<PermutedRow>& rows, auto emit) {
    std::size_t i = 0;
    while (i < rows.size()) {
      std::size_t j = i;
      while (j < rows.size() && rows[j][0] == rows[i][0] && rows[j][1] == rows[i][1]) ++j;
      emit(rows[i][0], rows[i][1], static_cast<std::uint64_t>(j - i));
      i = j;
    }
  };
  runs(idx.index(Permutation::PSO).rows, [&](TermId p, TermId s, std::uint64_t n) {
    f.subj_counts[p].emplace_back(s, n);
  });
  runs(idx.index(Permutation::POS).rows, [&](TermId p, TermId o, std::uint64_t n) {
    f.obj_counts[p].emplace_back(o, n);
  });
  return f;
}

namespace detail {

inline std::uint64_t dot_product(const std::vector<std::pair<TermId, std::uint64_t>>& a,
                                 const std::vector<std::pair<TermId, std::uint64_t>>& b) {
  std::uint64_t sum = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      sum += a[i].second * b[j].second;
      ++i;
      ++j;
    }
  }
  return sum;
}

template <typename K>
inline std::vector<std::pair<K, std::uint64_t>> sorted_counts(
    const std::unordered_map<K, std::uint64_t>& m) {
  std::vector<std::pair<K, std::uint64_t>> v(m.begin(), m.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

// Exact join selectivities over all property pairs and the four join roles:
// Sel = |equi-join| / (Card(p_i) * Card(p_j)). Per-partition dot products
// are exact because both counted copies of a join value live at its owner.
inline void compute_join_selectivities(StatsCatalog& cat,
                                       const std::vector<StatsFragment>& fragments) {
  std::set<TermId> props;
  for (const auto& [p, n] : cat.card_p) {
    (void)n;
    props.insert(p);
  }
  for (TermId pi : props) {
    for (TermId pj : props) {
      for (int role = 0; role < 4; ++role) {
        std::uint64_t total = 0;
        for (const auto& f : fragments) {
          auto side = [&](TermId p, bool subj)
              -> const std::vector<std::pair<TermId, std::uint64_t>>* {
            const auto& m = subj ? f.subj_counts : f.obj_counts;
            auto it = m.find(p);
            return it == m.end() ? nullptr : &it->second;
          };
          bool left_subj = role == static_cast<int>(JoinRole::SS) ||
                           role == static_cast<int>(JoinRole::SO);
          bool right_subj = role == static_cast<int>(JoinRole::SS) ||
                            role == static_cast<int>(JoinRole::OS);
          const auto* a = side(pi, left_subj);
          const auto* b = side(pj, right_subj);
          if (a && b) total += detail::dot_product(*a, *b);
        }
        double denom = static_cast<double>(cat.card_property(pi)) *
                       static_cast<double>(cat.card_property(pj));
        cat.join_sel[{pi, pj, role}] = denom > 0 ? static_cast<double>(total) / denom : 0.0;
      }
    }
  }
}

inline StatsCatalog merge_fragments(const std::vector<StatsFragment>& fragments,
                                    const DataGraphMeta& meta) {
  StatsCatalog cat;
  cat.meta = meta;
  std::unordered_map<TermId, std::uint64_t> s, p, o;
  std::unordered_map<std::uint64_t, std::uint64_t> so, ps, po;
  for (const auto& f : fragments) {
    for (const auto& [k, n] : f.s) s[k] += n;
    for (const auto& [k, n] : f.p) p[k] += n;
    for (const auto& [k, n] : f.o) o[k] += n;
    for (const auto& [k, n] : f.so) so[k] += n;
    for (const auto& [k, n] : f.ps) ps[k] += n;
    for (const auto& [k, n] : f.po) po[k] += n;
  }
  cat.card_s = detail::sorted_counts(s);
  cat.card_p = detail::sorted_counts(p);
  cat.card_o = detail::sorted_counts(o);
  cat.card_so = detail::sorted_counts(so);
  cat.card_ps = detail::sorted_counts(ps);
  cat.card_po = detail::sorted_counts(po);
  for (const auto& [k, n] : cat.card_p) {
    (void)k;
    cat.total_triples += n;
  }
  compute_join_selectivities(cat, fragments);
  return cat;
}

// ---- reachability selectivity ----

// Fraction of (s,t) pairs in V^p x V^p with s ~> t (self-reach counts).
// Exhaustive when |V^p|^2 fits in the sample budget, otherwise uniform
// sampling with replacement from a seeded generator.
inline double sample_reach_selectivity(const std::vector<EncodedTriple>& triples, TermId p,
                                       std::uint64_t sample_size, std::uint64_t seed) {
  std::unordered_map<TermId, std::vector<TermId>> adj;
  std::set<TermId> vert_set;
  for (const auto& t : triples) {
    if (t.p != p) continue;
    adj[t.s].push_back(t.o);
    vert_set.insert(t.s);
    vert_set.insert(t.o);
  }
  if (vert_set.empty())
    throw StoreError("unknown property: no edges with property id " + std::to_string(p));
  std::vector<TermId> verts(vert_set.begin(), vert_set.end());
  const std::uint64_t n = verts.size();

  std::unordered_map<TermId, std::unordered_set<TermId>> reached_memo;
  auto reaches = [&](TermId s, TermId t) {
    auto it = reached_memo.find(s);
    if (it == reached_memo.end()) {
      std::unordered_set<TermId> seen{s};
      std::vector<TermId> frontier{s};
      while (!frontier.empty()) {
        std::vector<TermId> next;
        for (TermId u : frontier) {
          auto a = adj.find(u);
          if (a == adj.end()) continue;
          for (TermId v : a->second)
            if (seen.insert(v).second) next.push_back(v);
        }
        frontier = std::move(next);
      }
      it = reached_memo.emplace(s, std::move(seen)).first;
    }
    return it->second.count(t) > 0;
  };

  if (n * n <= sample_size) {
    std::uint64_t hits = 0;
    for (TermId s : verts)
      for (TermId t : verts) hits += reaches(s, t);
    return static_cast<double>(hits) / static_cast<double>(n * n);
  }

  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(p) + 1)));
  std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < sample_size; ++i) {
    TermId s = verts[pick(rng)];
    TermId t = verts[pick(rng)];
    hits += reaches(s, t);
  }
  return static_cast<double>(hits) / static_cast<double>(sample_size);
}

inline void compute_reach_selectivities(StatsCatalog& cat,
                                        const std::vector<EncodedTriple>& triples,
                                        std::uint64_t sample_size, std::uint64_t seed) {
  cat.sample_size = sample_size;
  cat.sample_seed = seed;
  for (TermId p : cat.meta.properties)
    cat.reach_sel[p] = sample_reach_selectivity(triples, p, sample_size, seed);
}

inline DataGraphMeta compute_meta(const std::vector<EncodedTriple>& triples) {
  DataGraphMeta meta;
  std::set<TermId> verts;
  std::map<TermId, std::set<TermId>> pverts;
  std::map<TermId, std::set<std::pair<TermId, TermId>>> pedges;
  for (const auto& t : triples) {
    verts.insert(t.s);
    verts.insert(t.o);
    meta.properties.insert(t.p);
    pverts[t.p].insert(t.s);
    pverts[t.p].insert(t.o);
    pedges[t.p].emplace(t.s, t.o);
  }
  meta.vertex_count = verts.size();
  for (const auto& [p, vs] : pverts) meta.property_vertex_count[p] = vs.size();
  for (const auto& [p, es] : pedges) meta.property_edge_count[p] = es.size();
  return meta;
}

// ---- flat text persistence: kind<TAB>key...<TAB>value ----

inline void save_stats(std::ostream& out, const StatsCatalog& cat) {
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "total\t" << cat.total_triples << "\n";
  out << "sample\t" << cat.sample_size << "\t" << cat.sample_seed << "\n";
  out << "meta_v\t" << cat.meta.vertex_count << "\n";
  for (TermId p : cat.meta.properties)
    out << "meta_p\t" << p << "\t" << cat.meta.vertices_of(p) << "\t" << cat.meta.edges_of(p)
        << "\n";
  auto dump1 = [&](const char* kind, const auto& v) {
    for (const auto& [k, n] : v) out << kind << "\t" << k << "\t" << n << "\n";
  };
  dump1("card_s", cat.card_s);
  dump1("card_p", cat.card_p);
  dump1("card_o", cat.card_o);
  auto dump2 = [&](const char* kind, const auto& v) {
    for (const auto& [k, n] : v)
      out << kind << "\t" << (k >> 32) << "\t" << (k & 0xffffffffu) << "\t" << n << "\n";
  };
  dump2("pair_so", cat.card_so);
  dump2("pair_ps", cat.card_ps);
  dump2("pair_po", cat.card_po);
  for (const auto& [key, v] : cat.join_sel) {
    auto [pi, pj, role] = key;
    out << "joinsel\t" << pi << "\t" << pj << "\t" << name_of(static_cast<JoinRole>(role)) << "\t"
        << fmt(v) << "\n";
  }
  for (const auto& [p, v] : cat.reach_sel) out << "reachsel\t" << p << "\t" << fmt(v) << "\n";
}

inline StatsCatalog load_stats(std::istream& in) {
  StatsCatalog cat;
  std::string kind;
  while (in >> kind) {
    if (kind == "total") {
      in >> cat.total_triples;
    } else if (kind == "sample") {
      in >> cat.sample_size >> cat.sample_seed;
    } else if (kind == "meta_v") {
      in >> cat.meta.vertex_count;
    } else if (kind == "meta_p") {
      TermId p;
      std::uint64_t v, e;
      in >> p >> v >> e;
      cat.meta.properties.insert(p);
      cat.meta.property_vertex_count[p] = v;
      cat.meta.property_edge_count[p] = e;
    } else if (kind == "card_s" || kind == "card_p" || kind == "card_o") {
      TermId k;
      std::uint64_t n;
      in >> k >> n;
      auto& v = kind == "card_s" ? cat.card_s : kind == "card_p" ? cat.card_p : cat.card_o;
      v.emplace_back(k, n);
    } else if (kind == "pair_so" || kind == "pair_ps" || kind == "pair_po") {
      TermId a, b;
      std::uint64_t n;
      in >> a >> b >> n;
      auto& v = kind == "pair_so" ? cat.card_so : kind == "pair_ps" ? cat.card_ps : cat.card_po;
      v.emplace_back(pack_pair(a, b), n);
    } else if (kind == "joinsel") {
      TermId pi, pj;
      std::string role;
      double v;
      in >> pi >> pj >> role >> v;
      int r = role == "ss" ? 0 : role == "so" ? 1 : role == "os" ? 2 : 3;
      cat.join_sel[{pi, pj, r}] = v;
    } else if (kind == "reachsel") {
      TermId p;
      double v;
      in >> p >> v;
      cat.reach_sel[p] = v;
    } else {
      throw StoreError("unknown stats record kind: " + kind);
    }
  }
  return cat;
}

}  // namespace pathjoin
