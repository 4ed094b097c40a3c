#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pathjoin/errors.hpp"
#include "pathjoin/query.hpp"

namespace pathjoin {

// Multigraph over pattern relations per the optimizer's view: plain-atom
// patterns become relation vertices, shared variables become equi-join
// edges, and Star/Plus/Opt atoms become reachability edges between the
// vertices housing their endpoints. A constant reach endpoint yields a
// singleton-tuple vertex, an otherwise-unused variable an unbound-domain
// vertex over the property's vertex set.
struct QueryGraph {
  enum class VertexKind { Relation, Singleton, Unbound };

  struct Vertex {
    VertexKind kind = VertexKind::Relation;
    FlatPattern pattern;              // Relation
    Term constant;                    // Singleton
    std::string var;                  // Singleton: internal name; Unbound: the variable
    std::vector<Term> domain_props;   // Unbound: properties of incident reach edges
  };

  struct EquiEdge {
    int a = 0, b = 0;
    std::vector<std::string> vars;  // shared variables, sorted
  };

  // One reachability predicate may materialize as several parallel edges
  // when its endpoint variable is housed by several relation vertices.
  struct ReachPredicate {
    std::string source_var;  // internal name for constant endpoints
    std::string target_var;
    PathAtom atom;
  };

  struct ReachEdge {
    int a = 0, b = 0;    // a houses the source var, b the target var
    int predicate = 0;
  };

  std::vector<Vertex> vertices;
  std::vector<EquiEdge> equi_edges;
  std::vector<ReachPredicate> predicates;
  std::vector<ReachEdge> reach_edges;
};

// Internal variable names for singleton constants use a namespace no user
// or fresh variable can collide with.
inline std::string singleton_var_name(int n) { return "$c" + std::to_string(n); }

inline QueryGraph build_query_graph(const Query& q) {
  QueryGraph g;

  std::vector<const FlatPattern*> paths;
  for (const auto& fp : q.flat) {
    if (fp.atom.mod == PathMod::None) {
      QueryGraph::Vertex v;
      v.kind = QueryGraph::VertexKind::Relation;
      v.pattern = fp;
      g.vertices.push_back(std::move(v));
    } else {
      paths.push_back(&fp);
    }
  }

  // variable -> relation vertices housing it
  std::map<std::string, std::vector<int>> housed;
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& p = g.vertices[i].pattern;
    if (p.subject.is_var) housed[p.subject.var].push_back(static_cast<int>(i));
    if (p.object.is_var && (!p.subject.is_var || p.object.var != p.subject.var))
      housed[p.object.var].push_back(static_cast<int>(i));
  }

  // equi edges between every pair of relation vertices sharing variables
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < g.vertices.size(); ++j) {
      std::vector<std::string> shared;
      for (const auto& [var, verts] : housed) {
        bool in_i = std::find(verts.begin(), verts.end(), static_cast<int>(i)) != verts.end();
        bool in_j = std::find(verts.begin(), verts.end(), static_cast<int>(j)) != verts.end();
        if (in_i && in_j) shared.push_back(var);
      }
      if (!shared.empty())
        g.equi_edges.push_back({static_cast<int>(i), static_cast<int>(j), std::move(shared)});
    }
  }

  // reach predicates and their edge copies
  int singleton_counter = 0;
  std::map<std::string, int> unbound_vertex;  // variable -> vertex index
  auto endpoints_of = [&](const PatternTerm& t, const Term& property,
                          std::string& var_out) -> std::vector<int> {
    if (!t.is_var) {
      QueryGraph::Vertex v;
      v.kind = QueryGraph::VertexKind::Singleton;
      v.constant = t.term;
      v.var = singleton_var_name(singleton_counter++);
      g.vertices.push_back(std::move(v));
      var_out = g.vertices.back().var;
      return {static_cast<int>(g.vertices.size() - 1)};
    }
    var_out = t.var;
    auto it = housed.find(t.var);
    if (it != housed.end() && !it->second.empty()) return it->second;
    auto uit = unbound_vertex.find(t.var);
    if (uit != unbound_vertex.end()) {
      g.vertices[uit->second].domain_props.push_back(property);
      return {uit->second};
    }
    QueryGraph::Vertex v;
    v.kind = QueryGraph::VertexKind::Unbound;
    v.var = t.var;
    v.domain_props.push_back(property);
    g.vertices.push_back(std::move(v));
    int idx = static_cast<int>(g.vertices.size() - 1);
    unbound_vertex[t.var] = idx;
    return {idx};
  };

  for (const FlatPattern* fp : paths) {
    QueryGraph::ReachPredicate pred;
    pred.atom = fp->atom;
    auto sources = endpoints_of(fp->subject, fp->atom.property, pred.source_var);
    auto targets = endpoints_of(fp->object, fp->atom.property, pred.target_var);
    int pid = static_cast<int>(g.predicates.size());
    g.predicates.push_back(pred);
    for (int a : sources)
      for (int b : targets) g.reach_edges.push_back({a, b, pid});
  }

  if (g.vertices.empty()) throw QueryError("query has no patterns");

  // connectivity over equi + reach edges
  std::vector<int> seen(g.vertices.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    auto visit = [&](int a, int b) {
      if (a == v && !seen[b]) {
        seen[b] = 1;
        stack.push_back(b);
      }
      if (b == v && !seen[a]) {
        seen[a] = 1;
        stack.push_back(a);
      }
    };
    for (const auto& e : g.equi_edges) visit(e.a, e.b);
    for (const auto& e : g.reach_edges) visit(e.a, e.b);
  }
  if (std::count(seen.begin(), seen.end(), 1) != static_cast<long>(g.vertices.size()))
    throw QueryError("disconnected query: every pattern must share a variable or path");

  return g;
}

inline std::string to_string(const QueryGraph& g) {
  std::ostringstream out;
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    out << "R" << i << ": ";
    switch (v.kind) {
      case QueryGraph::VertexKind::Relation:
        out << to_string(v.pattern.subject) << " " << to_string(v.pattern.atom) << " "
            << to_string(v.pattern.object);
        break;
      case QueryGraph::VertexKind::Singleton:
        out << "singleton " << to_string(v.constant) << " as " << v.var;
        break;
      case QueryGraph::VertexKind::Unbound:
        out << "unbound ?" << v.var;
        break;
    }
    out << "\n";
  }
  for (const auto& e : g.equi_edges) {
    out << "equi R" << e.a << " -- R" << e.b << " on";
    for (const auto& v : e.vars) out << " ?" << v;
    out << "\n";
  }
  for (const auto& e : g.reach_edges) {
    const auto& p = g.predicates[e.predicate];
    out << "reach R" << e.a << " ~> R" << e.b << " via " << to_string(p.atom) << " (?"
        << p.source_var << " ~> ?" << p.target_var << ")\n";
  }
  return out.str();
}

inline std::string to_dot(const QueryGraph& g) {
  std::ostringstream out;
  out << "graph query {\n";
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    out << "  R" << i << " [label=\"R" << i << "\\n";
    switch (v.kind) {
      case QueryGraph::VertexKind::Relation:
        out << to_string(v.pattern.subject) << " " << to_string(v.pattern.atom) << " "
            << to_string(v.pattern.object);
        break;
      case QueryGraph::VertexKind::Singleton:
        out << to_string(v.constant);
        break;
      case QueryGraph::VertexKind::Unbound:
        out << "?" << v.var;
        break;
    }
    out << "\"];\n";
  }
  for (const auto& e : g.equi_edges) {
    out << "  R" << e.a << " -- R" << e.b << " [label=\"";
    for (const auto& v : e.vars) out << "?" << v << " ";
    out << "\"];\n";
  }
  for (const auto& e : g.reach_edges) {
    out << "  R" << e.a << " -- R" << e.b << " [style=dashed, label=\""
        << to_string(g.predicates[e.predicate].atom) << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace pathjoin
