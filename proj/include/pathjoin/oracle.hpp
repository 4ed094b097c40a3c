#pragma once

// Reference evaluator: naive scans, nested-loop joins and per-source BFS
// over the raw triple list. Ground truth for every engine equality test;
// deliberately shares no code with the index or runtime layers.

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "pathjoin/dictionary.hpp"
#include "pathjoin/errors.hpp"
#include "pathjoin/query.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

struct OracleResult {
  std::vector<std::string> schema;
  std::set<std::vector<TermId>> rows;
};

// Exact transitive closure of the p-induced subgraph (per-source BFS),
// self-pairs over V^p included.
inline std::set<std::pair<TermId, TermId>> brute_force_reach_closure(
    const std::vector<EncodedTriple>& triples, TermId p) {
  std::unordered_map<TermId, std::vector<TermId>> adj;
  std::set<TermId> verts;
  for (const auto& t : triples) {
    if (t.p != p) continue;
    adj[t.s].push_back(t.o);
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
        auto it = adj.find(u);
        if (it == adj.end()) continue;
        for (TermId v : it->second)
          if (seen.insert(v).second) next.push_back(v);
      }
      frontier = std::move(next);
    }
    for (TermId t : seen) closure.emplace(src, t);
  }
  return closure;
}

class OracleEvaluator {
 public:
  OracleEvaluator(const std::vector<EncodedTriple>& triples, const Dictionary& dict,
                  StarScope scope = StarScope::Vd)
      : triples_(triples), dict_(dict), scope_(scope) {
    for (const auto& t : triples_) {
      all_vertices_.insert(t.s);
      all_vertices_.insert(t.o);
    }
  }

  // Evaluates rewritten single-atom patterns; q.flat must be filled.
  OracleResult evaluate(const Query& q) {
    if (q.flat.empty())
      throw QueryError(q.raw.empty() ? "query has no patterns" : "query not rewritten");
    std::vector<std::string> schema;
    std::vector<std::vector<TermId>> rows{{}};

    for (const auto& fp : q.flat) {
      if (fp.atom.mod == PathMod::None)
        apply_plain(fp, schema, rows);
      else
        apply_path(fp, schema, rows);
    }

    OracleResult out;
    out.schema = q.select_all ? user_variables(q) : q.projection;
    std::vector<int> cols;
    for (const auto& v : out.schema) {
      auto it = std::find(schema.begin(), schema.end(), v);
      if (it == schema.end()) throw QueryError("projected variable ?" + v + " is not bound");
      cols.push_back(static_cast<int>(it - schema.begin()));
    }
    for (const auto& row : rows) {
      std::vector<TermId> pr;
      pr.reserve(cols.size());
      for (int c : cols) pr.push_back(row[c]);
      out.rows.insert(std::move(pr));
    }
    return out;
  }

  const std::set<std::pair<TermId, TermId>>& closure(TermId p) {
    auto it = closures_.find(p);
    if (it == closures_.end())
      it = closures_.emplace(p, brute_force_reach_closure(triples_, p)).first;
    return it->second;
  }

 private:
  TermId encode_or_sentinel(const Term& t) const {
    auto id = dict_.lookup(t);
    return id ? *id : kInvalidTerm;
  }

  std::set<TermId> property_vertices(TermId p) const {
    std::set<TermId> out;
    for (const auto& t : triples_) {
      if (t.p != p) continue;
      out.insert(t.s);
      out.insert(t.o);
    }
    return out;
  }

  // Pair set of one modified atom under the documented semantics.
  std::set<std::pair<TermId, TermId>> modifier_pairs(const PathAtom& atom) const {
    TermId p = encode_or_sentinel(atom.property);
    std::set<std::pair<TermId, TermId>> pairs;
    auto vp = property_vertices(p);
    if (atom.mod == PathMod::Opt) {
      for (const auto& t : triples_)
        if (t.p == p && t.s != t.o) pairs.emplace(t.s, t.o);
    } else {
      for (const auto& [s, t] : brute_force_reach_closure(triples_, p))
        if (s != t) pairs.emplace(s, t);
    }
    if (atom.mod == PathMod::Star || atom.mod == PathMod::Opt) {
      const std::set<TermId>& scope_set = scope_ == StarScope::Vd ? all_vertices_ : vp;
      for (TermId v : scope_set) pairs.emplace(v, v);
    }
    return pairs;  // Plus: closure minus equal endpoints, per the s != t rule
  }

  static int col_of(const std::vector<std::string>& schema, const std::string& var) {
    auto it = std::find(schema.begin(), schema.end(), var);
    return it == schema.end() ? -1 : static_cast<int>(it - schema.begin());
  }

  void apply_plain(const FlatPattern& fp, std::vector<std::string>& schema,
                   std::vector<std::vector<TermId>>& rows) const {
    TermId p = encode_or_sentinel(fp.atom.property);
    std::vector<EncodedTriple> matches;
    for (const auto& t : triples_)
      if (t.p == p) matches.push_back(t);

    int scol = fp.subject.is_var ? col_of(schema, fp.subject.var) : -1;
    int ocol = fp.object.is_var ? col_of(schema, fp.object.var) : -1;
    bool same_new_var = fp.subject.is_var && fp.object.is_var && scol < 0 && ocol < 0 &&
                        fp.subject.var == fp.object.var;
    TermId sconst = fp.subject.is_var ? 0 : encode_or_sentinel(fp.subject.term);
    TermId oconst = fp.object.is_var ? 0 : encode_or_sentinel(fp.object.term);

    std::vector<std::vector<TermId>> next;
    for (const auto& row : rows) {
      for (const auto& t : matches) {
        if (fp.subject.is_var) {
          if (scol >= 0 && row[scol] != t.s) continue;
        } else if (t.s != sconst) {
          continue;
        }
        if (fp.object.is_var) {
          if (ocol >= 0 && row[ocol] != t.o) continue;
          if (same_new_var && t.s != t.o) continue;
        } else if (t.o != oconst) {
          continue;
        }
        auto extended = row;
        if (fp.subject.is_var && scol < 0) extended.push_back(t.s);
        if (fp.object.is_var && ocol < 0 && !same_new_var) extended.push_back(t.o);
        next.push_back(std::move(extended));
      }
    }
    if (fp.subject.is_var && scol < 0) schema.push_back(fp.subject.var);
    if (fp.object.is_var && ocol < 0 && !same_new_var) schema.push_back(fp.object.var);
    rows = std::move(next);
  }

  void apply_path(const FlatPattern& fp, std::vector<std::string>& schema,
                  std::vector<std::vector<TermId>>& rows) const {
    auto pairs = modifier_pairs(fp.atom);

    int scol = fp.subject.is_var ? col_of(schema, fp.subject.var) : -1;
    int ocol = fp.object.is_var ? col_of(schema, fp.object.var) : -1;
    bool same_new_var = fp.subject.is_var && fp.object.is_var && scol < 0 && ocol < 0 &&
                        fp.subject.var == fp.object.var;
    TermId sconst = fp.subject.is_var ? 0 : encode_or_sentinel(fp.subject.term);
    TermId oconst = fp.object.is_var ? 0 : encode_or_sentinel(fp.object.term);

    std::vector<std::vector<TermId>> next;
    for (const auto& row : rows) {
      for (const auto& [s, t] : pairs) {
        if (fp.subject.is_var) {
          if (scol >= 0 && row[scol] != s) continue;
        } else if (s != sconst) {
          continue;
        }
        if (fp.object.is_var) {
          if (ocol >= 0 && row[ocol] != t) continue;
          if (same_new_var && s != t) continue;
        } else if (t != oconst) {
          continue;
        }
        auto extended = row;
        if (fp.subject.is_var && scol < 0) extended.push_back(s);
        if (fp.object.is_var && ocol < 0 && !same_new_var) extended.push_back(t);
        next.push_back(std::move(extended));
      }
    }
    if (fp.subject.is_var && scol < 0) schema.push_back(fp.subject.var);
    if (fp.object.is_var && ocol < 0 && !same_new_var) schema.push_back(fp.object.var);
    rows = std::move(next);
  }

  const std::vector<EncodedTriple>& triples_;
  const Dictionary& dict_;
  StarScope scope_;
  std::set<TermId> all_vertices_;
  std::map<TermId, std::set<std::pair<TermId, TermId>>> closures_;
};

inline OracleResult oracle_evaluate(const std::vector<EncodedTriple>& triples,
                                    const Dictionary& dict, const Query& q,
                                    StarScope scope = StarScope::Vd) {
  return OracleEvaluator(triples, dict, scope).evaluate(q);
}

}  // namespace pathjoin
