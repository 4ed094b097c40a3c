#pragma once

#include <algorithm>
#include <bit>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pathjoin/dictionary.hpp"
#include "pathjoin/errors.hpp"
#include "pathjoin/query_graph.hpp"
#include "pathjoin/stats.hpp"
#include "pathjoin/triple_index.hpp"

namespace pathjoin {

// Cost-based bushy-plan enumeration over connected vertex subsets of the
// query graph, producing a tree of DIS / DMJ / DHJ / DRJ operators with
// resharding annotations. The DP memo is keyed by (subset, output shard
// key); the shard key is the one physical property that changes downstream
// shipping cost.

using VarId = int;
inline constexpr VarId kNoVar = -1;

enum class OpKind : std::uint8_t { DIS, DMJ, DHJ, DRJ };

inline const char* name_of(OpKind k) {
  static const char* names[] = {"DIS", "DMJ", "DHJ", "DRJ"};
  return names[static_cast<int>(k)];
}

struct VarTable {
  std::vector<std::string> names;
  std::map<std::string, VarId> ids;

  VarId intern(const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    VarId id = static_cast<VarId>(names.size());
    names.push_back(name);
    ids.emplace(name, id);
    return id;
  }

  VarId id_of(const std::string& name) const {
    auto it = ids.find(name);
    return it == ids.end() ? kNoVar : it->second;
  }

  const std::string& name_of(VarId id) const { return names[id]; }
};

struct LeafScan {
  enum class Kind : std::uint8_t { Pattern, Singleton, Unbound };
  Kind kind = Kind::Pattern;
  int vertex = -1;
  // Pattern
  ShardGroup group = ShardGroup::SubjectKey;
  Permutation perm = Permutation::SPO;
  int prefix_len = 0;
  std::array<bool, 3> is_const{{false, false, false}};
  std::array<TermId, 3> const_val{{0, 0, 0}};
  std::array<VarId, 3> var_at{{kNoVar, kNoVar, kNoVar}};
  // Singleton
  TermId constant = kInvalidTerm;
  // Unbound
  std::vector<TermId> domain_props;
  VarId col = kNoVar;
};

struct PlanCondition {
  enum class Kind : std::uint8_t { Equi, Reach };
  Kind kind = Kind::Equi;
  double sel = 1.0;
  VarId var = kNoVar;  // Equi
  // Reach
  int predicate = -1;
  VarId source = kNoVar;
  VarId target = kNoVar;
  TermId property = kInvalidTerm;
  std::string property_name;
  PathMod mod = PathMod::None;
};

struct PlanNode {
  OpKind kind = OpKind::DIS;
  int op_id = -1;
  std::vector<std::shared_ptr<PlanNode>> children;
  LeafScan leaf;
  std::vector<PlanCondition> conditions;
  double est_card = 0;
  double est_cost = 0;
  VarId shard_key = kNoVar;
  VarId join_var = kNoVar;  // DMJ/DHJ
  bool drj_source_left = true;
  std::vector<VarId> sort_prefix;
  std::vector<VarId> schema;
  std::vector<bool> reshard_child;
};

struct PhysicalPlan {
  std::shared_ptr<PlanNode> root;
  VarTable vars;
  std::vector<VarId> projection;
  StarScope scope = StarScope::Vd;
  int partitions = 1;
  double gamma = 1.0;
  int op_count = 0;
};

// ---- cost model ----

// Per-operator processing cost and output cardinality for an ordered
// condition list: the i-th condition costs the pairs surviving conditions
// 1..i, so output card = |L|*|R|*prod(Sel).
struct JoinEstimate {
  double cost = 0;
  double card = 0;
};

inline JoinEstimate join_cost(const std::vector<PlanCondition>& conditions, double left_card,
                              double right_card) {
  JoinEstimate e;
  double residual = left_card * right_card;
  for (const auto& c : conditions) {
    residual *= c.sel;
    e.cost += residual;
  }
  e.card = residual;
  return e;
}

inline double shipping_cost(const PlanNode& node, double gamma) {
  double cost = 0;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (node.reshard_child[i])
      cost += node.children[i]->est_card * static_cast<double>(node.children[i]->schema.size()) *
              gamma;
  }
  return cost;
}

// max(children) + operator cost + shipping: parallel branches overlap.
inline double combined_cost(const PlanNode& node, double op_cost, double gamma) {
  double child_max = 0;
  for (const auto& c : node.children) child_max = std::max(child_max, c->est_cost);
  return child_max + op_cost + shipping_cost(node, gamma);
}

// ---- plan construction ----

namespace odetail {

struct Ctx {
  const QueryGraph& graph;
  const StatsCatalog& stats;
  const Dictionary& dict;
  int k = 1;
  double gamma = 1.0;
  VarTable vars;
  std::vector<TermId> vertex_property;       // encoded pattern property per vertex
  std::vector<std::uint32_t> adjacency;      // vertex -> neighbor bitmask
  std::vector<std::vector<VarId>> vertex_vars;
  std::vector<std::vector<int>> self_predicates;  // per vertex
  std::vector<TermId> predicate_property;    // encoded per predicate
};

inline TermId encode_or_sentinel(const Dictionary& dict, const Term& t) {
  auto id = dict.lookup(t);
  return id ? *id : kInvalidTerm;
}

inline Ctx make_ctx(const QueryGraph& g, const StatsCatalog& stats, const Dictionary& dict, int k,
                    double gamma) {
  Ctx ctx{g, stats, dict, k, gamma, {}, {}, {}, {}, {}, {}};
  const std::size_t n = g.vertices.size();
  ctx.vertex_property.assign(n, kInvalidTerm);
  ctx.vertex_vars.resize(n);
  ctx.self_predicates.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& vert = g.vertices[v];
    switch (vert.kind) {
      case QueryGraph::VertexKind::Relation: {
        const auto& p = vert.pattern;
        ctx.vertex_property[v] = encode_or_sentinel(dict, p.atom.property);
        if (p.subject.is_var) ctx.vertex_vars[v].push_back(ctx.vars.intern(p.subject.var));
        if (p.object.is_var) {
          VarId id = ctx.vars.intern(p.object.var);
          if (ctx.vertex_vars[v].empty() || ctx.vertex_vars[v][0] != id)
            ctx.vertex_vars[v].push_back(id);
        }
        break;
      }
      case QueryGraph::VertexKind::Singleton:
      case QueryGraph::VertexKind::Unbound:
        ctx.vertex_vars[v].push_back(ctx.vars.intern(vert.var));
        break;
    }
  }
  for (const auto& p : g.predicates) {
    ctx.vars.intern(p.source_var);
    ctx.vars.intern(p.target_var);
    ctx.predicate_property.push_back(encode_or_sentinel(dict, p.atom.property));
  }
  ctx.adjacency.assign(n, 0);
  auto link = [&](int a, int b) {
    if (a != b) {
      ctx.adjacency[a] |= 1u << b;
      ctx.adjacency[b] |= 1u << a;
    }
  };
  for (const auto& e : g.equi_edges) link(e.a, e.b);
  for (const auto& e : g.reach_edges) {
    link(e.a, e.b);
    if (e.a == e.b) ctx.self_predicates[e.a].push_back(e.predicate);
  }
  for (auto& sp : ctx.self_predicates) {
    std::sort(sp.begin(), sp.end());
    sp.erase(std::unique(sp.begin(), sp.end()), sp.end());
  }
  return ctx;
}

inline bool subset_connected(const Ctx& ctx, std::uint32_t subset) {
  if (subset == 0) return false;
  std::uint32_t start = subset & (~subset + 1);
  std::uint32_t seen = start;
  std::uint32_t frontier = start;
  while (frontier) {
    std::uint32_t next = 0;
    for (std::uint32_t f = frontier; f;) {
      int v = std::countr_zero(f);
      f &= f - 1;
      next |= ctx.adjacency[v] & subset & ~seen;
    }
    seen |= next;
    frontier = next;
  }
  return seen == subset;
}

// role of a variable inside a pattern vertex (subject preferred on repeats)
inline JoinRole role_of(const Ctx& ctx, int vertex_a, VarId var_a, int vertex_b, VarId var_b) {
  auto pos = [&](int vertex, VarId var) {
    const auto& p = ctx.graph.vertices[vertex].pattern;
    if (p.subject.is_var && ctx.vars.id_of(p.subject.var) == var) return 0;
    return 1;
  };
  int a = pos(vertex_a, var_a), b = pos(vertex_b, var_b);
  if (a == 0 && b == 0) return JoinRole::SS;
  if (a == 0 && b == 1) return JoinRole::SO;
  if (a == 1 && b == 0) return JoinRole::OS;
  return JoinRole::OO;
}

inline bool predicate_applied(const Ctx& ctx, int predicate, std::uint32_t subset) {
  for (const auto& e : ctx.graph.reach_edges) {
    if (e.predicate != predicate) continue;
    if ((subset >> e.a & 1) && (subset >> e.b & 1)) return true;
  }
  return false;
}

// Conditions attached to a join of (left, right): one Equi condition per
// (crossing equi edge, shared variable) and one Reach condition per
// predicate newly bridged by this split. Never empty for a valid split.
struct SplitConditions {
  std::vector<PlanCondition> equi;
  std::vector<PlanCondition> reach;
};

inline SplitConditions collect_conditions(const Ctx& ctx, std::uint32_t left,
                                          std::uint32_t right) {
  SplitConditions out;
  for (const auto& e : ctx.graph.equi_edges) {
    bool al = left >> e.a & 1, ar = right >> e.a & 1;
    bool bl = left >> e.b & 1, br = right >> e.b & 1;
    if (!((al && br) || (ar && bl))) continue;
    for (const auto& var : e.vars) {
      PlanCondition c;
      c.kind = PlanCondition::Kind::Equi;
      c.var = ctx.vars.id_of(var);
      TermId pa = ctx.vertex_property[e.a], pb = ctx.vertex_property[e.b];
      if (pa == kInvalidTerm || pb == kInvalidTerm) {
        c.sel = 0.0;
      } else {
        c.sel = ctx.stats.sel_join(pa, pb, role_of(ctx, e.a, c.var, e.b, c.var));
      }
      out.equi.push_back(c);
    }
  }
  std::set<int> new_predicates;
  for (const auto& e : ctx.graph.reach_edges) {
    if (e.a == e.b) continue;  // handled at the leaf
    bool crosses = ((left >> e.a & 1) && (right >> e.b & 1)) ||
                   ((right >> e.a & 1) && (left >> e.b & 1));
    if (!crosses) continue;
    if (predicate_applied(ctx, e.predicate, left) || predicate_applied(ctx, e.predicate, right))
      continue;
    new_predicates.insert(e.predicate);
  }
  for (int pid : new_predicates) {
    const auto& pred = ctx.graph.predicates[pid];
    PlanCondition c;
    c.kind = PlanCondition::Kind::Reach;
    c.predicate = pid;
    c.source = ctx.vars.id_of(pred.source_var);
    c.target = ctx.vars.id_of(pred.target_var);
    c.property = ctx.predicate_property[pid];
    c.property_name = pred.atom.property.lexical;
    c.mod = pred.atom.mod;
    c.sel = c.property == kInvalidTerm ? 0.0 : ctx.stats.sel_reach(c.property);
    out.reach.push_back(c);
  }
  return out;
}

inline std::vector<VarId> merge_schema(const std::vector<VarId>& a, const std::vector<VarId>& b) {
  std::vector<VarId> out = a;
  for (VarId v : b)
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  return out;
}

inline bool schema_has(const std::vector<VarId>& s, VarId v) {
  return std::find(s.begin(), s.end(), v) != s.end();
}

// leaf variants for one query-graph vertex (without self-condition wraps)
inline std::vector<std::shared_ptr<PlanNode>> leaf_variants(const Ctx& ctx, int vertex) {
  std::vector<std::shared_ptr<PlanNode>> out;
  const auto& vert = ctx.graph.vertices[vertex];
  if (vert.kind == QueryGraph::VertexKind::Singleton) {
    auto node = std::make_shared<PlanNode>();
    node->kind = OpKind::DIS;
    node->leaf.kind = LeafScan::Kind::Singleton;
    node->leaf.vertex = vertex;
    node->leaf.constant = encode_or_sentinel(ctx.dict, vert.constant);
    node->leaf.col = ctx.vars.id_of(vert.var);
    node->schema = {node->leaf.col};
    node->shard_key = node->leaf.col;
    node->sort_prefix = {node->leaf.col};
    node->est_card = 1.0;
    node->est_cost = 1.0;
    out.push_back(std::move(node));
    return out;
  }
  if (vert.kind == QueryGraph::VertexKind::Unbound) {
    auto node = std::make_shared<PlanNode>();
    node->kind = OpKind::DIS;
    node->leaf.kind = LeafScan::Kind::Unbound;
    node->leaf.vertex = vertex;
    node->leaf.col = ctx.vars.id_of(vert.var);
    double card = 0, edges = 0;
    bool first = true;
    for (const auto& prop : vert.domain_props) {
      TermId p = encode_or_sentinel(ctx.dict, prop);
      node->leaf.domain_props.push_back(p);
      double vc = p == kInvalidTerm ? 0.0 : static_cast<double>(ctx.stats.meta.vertices_of(p));
      double ec = p == kInvalidTerm ? 0.0 : static_cast<double>(ctx.stats.meta.edges_of(p));
      if (first || vc < card) card = vc;
      if (first || ec < edges) edges = ec;
      first = false;
    }
    node->schema = {node->leaf.col};
    node->shard_key = node->leaf.col;
    node->sort_prefix = {node->leaf.col};
    node->est_card = card;
    node->est_cost = edges / ctx.k;
    out.push_back(std::move(node));
    return out;
  }

  const auto& p = vert.pattern;
  LeafScan base;
  base.kind = LeafScan::Kind::Pattern;
  base.vertex = vertex;
  base.is_const = {!p.subject.is_var, true, !p.object.is_var};
  base.const_val = {base.is_const[0] ? encode_or_sentinel(ctx.dict, p.subject.term) : 0,
                    encode_or_sentinel(ctx.dict, p.atom.property),
                    base.is_const[2] ? encode_or_sentinel(ctx.dict, p.object.term) : 0};
  base.var_at = {p.subject.is_var ? ctx.vars.id_of(p.subject.var) : kNoVar, kNoVar,
                 p.object.is_var ? ctx.vars.id_of(p.object.var) : kNoVar};
  PatternConstants pc{base.is_const[0], true, base.is_const[2]};

  auto card_of = [&](bool with_s, bool with_p, bool with_o) {
    std::optional<TermId> s, pp, o;
    if (with_s && base.is_const[0]) s = base.const_val[0];
    if (with_p) pp = base.const_val[1];
    if (with_o && base.is_const[2]) o = base.const_val[2];
    return ctx.stats.pattern_card(s, pp, o);
  };

  for (ShardGroup group : {ShardGroup::SubjectKey, ShardGroup::ObjectKey}) {
    auto node = std::make_shared<PlanNode>();
    node->kind = OpKind::DIS;
    node->leaf = base;
    node->leaf.group = group;
    node->leaf.perm = select_permutation_in_group(pc, group);
    node->leaf.prefix_len = prefix_match_length(node->leaf.perm, pc);
    const auto& ord = component_order(node->leaf.perm);
    bool pre_s = false, pre_p = false, pre_o = false;
    for (int i = 0; i < node->leaf.prefix_len; ++i) {
      if (ord[i] == 0) pre_s = true;
      if (ord[i] == 1) pre_p = true;
      if (ord[i] == 2) pre_o = true;
    }
    double prefix_card = card_of(pre_s, pre_p, pre_o);
    node->est_cost = prefix_card / ctx.k;
    node->est_card = card_of(true, true, true);
    for (int pos : {0, 2}) {
      VarId v = base.var_at[pos];
      if (v != kNoVar && !schema_has(node->schema, v)) node->schema.push_back(v);
    }
    // output order: non-constant permutation positions after the prefix
    for (int i = node->leaf.prefix_len; i < 3; ++i) {
      VarId v = base.var_at[ord[i]];
      if (v != kNoVar && !schema_has(node->sort_prefix, v)) node->sort_prefix.push_back(v);
    }
    if (group == ShardGroup::SubjectKey) {
      node->shard_key = base.var_at[0];  // kNoVar when the subject is a constant
    } else {
      node->shard_key = base.var_at[2];
    }
    out.push_back(std::move(node));
  }
  return out;
}

// Wraps a leaf in a unary DRJ when reach predicates begin and end inside the
// same vertex (e.g. `?x p* ?x`).
inline std::shared_ptr<PlanNode> wrap_self_conditions(const Ctx& ctx,
                                                      std::shared_ptr<PlanNode> node,
                                                      const std::vector<int>& predicates) {
  if (predicates.empty()) return node;
  auto drj = std::make_shared<PlanNode>();
  drj->kind = OpKind::DRJ;
  drj->children.push_back(node);
  drj->reshard_child.push_back(false);
  for (int pid : predicates) {
    const auto& pred = ctx.graph.predicates[pid];
    PlanCondition c;
    c.kind = PlanCondition::Kind::Reach;
    c.predicate = pid;
    c.source = ctx.vars.id_of(pred.source_var);
    c.target = ctx.vars.id_of(pred.target_var);
    c.property = ctx.predicate_property[pid];
    c.property_name = pred.atom.property.lexical;
    c.mod = pred.atom.mod;
    c.sel = c.property == kInvalidTerm ? 0.0 : ctx.stats.sel_reach(c.property);
    drj->conditions.push_back(c);
  }
  double residual = node->est_card;
  double op_cost = 0;
  for (const auto& c : drj->conditions) {
    residual *= c.sel;
    op_cost += residual;
  }
  drj->est_card = residual;
  drj->schema = node->schema;
  drj->reshard_child[0] = node->shard_key != drj->conditions.front().source;
  drj->shard_key = drj->conditions.back().target;
  drj->est_cost = combined_cost(*drj, op_cost, ctx.gamma);
  return drj;
}

// one join candidate for (left, right) under a fixed reach-condition order
inline std::shared_ptr<PlanNode> make_join(const Ctx& ctx, std::shared_ptr<PlanNode> left,
                                           std::shared_ptr<PlanNode> right,
                                           const std::vector<PlanCondition>& equi,
                                           const std::vector<PlanCondition>& reach) {
  auto node = std::make_shared<PlanNode>();
  node->children = {left, right};
  node->reshard_child = {false, false};
  node->conditions = equi;
  node->conditions.insert(node->conditions.end(), reach.begin(), reach.end());
  node->schema = merge_schema(left->schema, right->schema);

  if (!reach.empty()) {
    node->kind = OpKind::DRJ;
    const auto& c0 = reach.front();
    // a crossing predicate guarantees source-in-one-side/target-in-other for
    // at least one orientation; shared variables may satisfy both, in which
    // case the left operand acts as the source side
    bool sl = schema_has(left->schema, c0.source), tr = schema_has(right->schema, c0.target);
    bool sr = schema_has(right->schema, c0.source), tl = schema_has(left->schema, c0.target);
    bool src_left = (sl && tr) ? true : (sr && tl) ? false : sl;
    node->drj_source_left = src_left;
    auto& src_child = src_left ? left : right;
    auto& tgt_child = src_left ? right : left;
    node->reshard_child[src_left ? 0 : 1] = src_child->shard_key != c0.source;
    node->reshard_child[src_left ? 1 : 0] = tgt_child->shard_key != c0.target;
    node->shard_key = c0.target;
  } else {
    VarId v = equi.front().var;
    node->join_var = v;
    bool sorted = !left->sort_prefix.empty() && left->sort_prefix.front() == v &&
                  !right->sort_prefix.empty() && right->sort_prefix.front() == v;
    node->kind = sorted ? OpKind::DMJ : OpKind::DHJ;
    node->reshard_child[0] = left->shard_key != v;
    node->reshard_child[1] = right->shard_key != v;
    node->shard_key = v;
    if (node->kind == OpKind::DMJ) node->sort_prefix = {v};
  }

  auto est = join_cost(node->conditions, left->est_card, right->est_card);
  node->est_card = est.card;
  node->est_cost = combined_cost(*node, est.cost, ctx.gamma);
  return node;
}

// all join candidates for fixed children: permutations of the reach
// conditions (capped), equi conditions always first
inline void join_candidates(const Ctx& ctx, const std::shared_ptr<PlanNode>& left,
                            const std::shared_ptr<PlanNode>& right, const SplitConditions& sc,
                            const std::function<void(std::shared_ptr<PlanNode>)>& sink) {
  if (sc.reach.empty()) {
    if (sc.equi.empty())
      throw PlanError("join split without conditions");  // unreachable by construction
    sink(make_join(ctx, left, right, sc.equi, {}));
    return;
  }
  std::vector<int> order(sc.reach.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  if (order.size() <= 5) {
    do {
      std::vector<PlanCondition> reach;
      for (int i : order) reach.push_back(sc.reach[i]);
      sink(make_join(ctx, left, right, sc.equi, reach));
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return sc.reach[a].sel < sc.reach[b].sel; });
    std::vector<PlanCondition> reach;
    for (int i : order) reach.push_back(sc.reach[i]);
    sink(make_join(ctx, left, right, sc.equi, reach));
  }
}

}  // namespace odetail

// Recomputes shard keys and reshard marks bottom-up; the enumerator already
// fills them, so this also serves as a consistency pass over a finished tree.
inline void annotate_sharding(PlanNode& node, int k) {
  for (auto& c : node.children) annotate_sharding(*c, k);
  if (node.kind == OpKind::DIS) return;
  if (k == 1) {
    std::fill(node.reshard_child.begin(), node.reshard_child.end(), false);
    return;
  }
  if (node.kind == OpKind::DMJ || node.kind == OpKind::DHJ) {
    node.reshard_child[0] = node.children[0]->shard_key != node.join_var;
    node.reshard_child[1] = node.children[1]->shard_key != node.join_var;
    return;
  }
  // DRJ
  const PlanCondition* c0 = nullptr;
  for (const auto& c : node.conditions) {
    if (c.kind == PlanCondition::Kind::Reach) {
      c0 = &c;
      break;
    }
  }
  if (!c0) throw PlanError("DRJ node without reach condition");
  if (node.children.size() == 1) {
    node.reshard_child[0] = node.children[0]->shard_key != c0->source;
    return;
  }
  int src = node.drj_source_left ? 0 : 1;
  node.reshard_child[src] = node.children[src]->shard_key != c0->source;
  node.reshard_child[1 - src] = node.children[1 - src]->shard_key != c0->target;
}

inline void assign_op_ids(PlanNode& node, int& counter) {
  node.op_id = counter++;
  for (auto& c : node.children) assign_op_ids(*c, counter);
}

// ---- enumeration ----

inline PhysicalPlan enumerate_plan(const Query& q, const QueryGraph& g, const StatsCatalog& stats,
                                   const Dictionary& dict, int k, double gamma,
                                   StarScope scope) {
  using namespace odetail;
  const std::size_t n = g.vertices.size();
  if (n > 30) throw PlanError("query too large: " + std::to_string(n) + " vertices");
  Ctx ctx = make_ctx(g, stats, dict, k, gamma);

  // (subset, shard_key) -> best plan
  std::map<std::pair<std::uint32_t, VarId>, std::shared_ptr<PlanNode>> memo;
  auto offer = [&](std::uint32_t subset, std::shared_ptr<PlanNode> node) {
    auto key = std::make_pair(subset, node->shard_key);
    auto it = memo.find(key);
    if (it == memo.end() || node->est_cost < it->second->est_cost) memo[key] = std::move(node);
  };

  for (std::size_t v = 0; v < n; ++v) {
    for (auto& variant : leaf_variants(ctx, static_cast<int>(v)))
      offer(1u << v, wrap_self_conditions(ctx, variant, ctx.self_predicates[v]));
  }

  auto entries_of = [&](std::uint32_t subset) {
    std::vector<std::shared_ptr<PlanNode>> out;
    for (auto it = memo.lower_bound({subset, kNoVar}); it != memo.end() && it->first.first == subset;
         ++it)
      out.push_back(it->second);
    return out;
  };

  const std::uint32_t full = n == 32 ? 0xffffffffu : (1u << n) - 1;
  bool use_dp = n <= 12;

  if (use_dp) {
    for (std::uint32_t subset = 1; subset <= full; ++subset) {
      if ((subset & (subset - 1)) == 0) continue;  // singleton: base case
      if (!subset_connected(ctx, subset)) continue;
      std::uint32_t low = subset & (~subset + 1);
      for (std::uint32_t left = (subset - 1) & subset; left; left = (left - 1) & subset) {
        if (!(left & low)) continue;  // canonical: left holds the lowest vertex
        std::uint32_t right = subset & ~left;
        if (right == 0) continue;
        if (!subset_connected(ctx, left) || !subset_connected(ctx, right)) continue;
        auto sc = collect_conditions(ctx, left, right);
        if (sc.equi.empty() && sc.reach.empty()) continue;
        for (const auto& le : entries_of(left)) {
          for (const auto& re : entries_of(right)) {
            join_candidates(ctx, le, re, sc,
                            [&](std::shared_ptr<PlanNode> cand) { offer(subset, std::move(cand)); });
          }
        }
      }
    }
  } else {
    // greedy pairing beyond the DP width bound
    std::vector<std::uint32_t> components;
    for (std::size_t v = 0; v < n; ++v) components.push_back(1u << v);
    while (components.size() > 1) {
      double best_cost = 0;
      std::shared_ptr<PlanNode> best;
      std::uint32_t best_union = 0;
      std::size_t bi = 0, bj = 0;
      bool found = false;
      for (std::size_t i = 0; i < components.size(); ++i) {
        for (std::size_t j = i + 1; j < components.size(); ++j) {
          auto sc = collect_conditions(ctx, components[i], components[j]);
          if (sc.equi.empty() && sc.reach.empty()) continue;
          for (const auto& le : entries_of(components[i])) {
            for (const auto& re : entries_of(components[j])) {
              join_candidates(ctx, le, re, sc, [&](std::shared_ptr<PlanNode> cand) {
                if (!found || cand->est_cost < best_cost) {
                  found = true;
                  best_cost = cand->est_cost;
                  best = cand;
                  best_union = components[i] | components[j];
                  bi = i;
                  bj = j;
                }
              });
            }
          }
        }
      }
      if (!found) throw PlanError("disconnected query graph during greedy planning");
      offer(best_union, best);
      components.erase(components.begin() + static_cast<long>(bj));
      components[bi] = best_union;
      components.erase(
          std::remove_if(components.begin(), components.end(),
                         [&](std::uint32_t c) { return c != best_union && (c & best_union); }),
          components.end());
    }
  }

  std::shared_ptr<PlanNode> best;
  for (const auto& e : entries_of(full)) {
    if (!best || e->est_cost < best->est_cost) best = e;
  }
  if (!best) throw PlanError("no plan found for the query graph");

  PhysicalPlan plan;
  plan.root = best;
  plan.vars = ctx.vars;
  plan.scope = scope;
  plan.partitions = k;
  plan.gamma = gamma;
  annotate_sharding(*plan.root, k);
  int counter = 0;
  assign_op_ids(*plan.root, counter);
  plan.op_count = counter;
  auto user = q.select_all ? user_variables(q) : q.projection;
  for (const auto& name : user) {
    VarId id = plan.vars.id_of(name);
    if (id == kNoVar || !odetail::schema_has(plan.root->schema, id))
      throw PlanError("projected variable ?" + name + " is not bound by the query");
    plan.projection.push_back(id);
  }
  return plan;
}

// ---- rendering ----

inline std::string describe(const PhysicalPlan& plan, const PlanCondition& c) {
  std::ostringstream out;
  if (c.kind == PlanCondition::Kind::Equi) {
    out << "?" << plan.vars.name_of(c.var);
  } else {
    out << "?" << plan.vars.name_of(c.source) << " ~"
        << (c.property_name.empty() ? "p" + std::to_string(c.property) : c.property_name);
    switch (c.mod) {
      case PathMod::Star: out << "*"; break;
      case PathMod::Plus: out << "+"; break;
      case PathMod::Opt: out << "?"; break;
      default: break;
    }
    out << "~> ?" << plan.vars.name_of(c.target);
  }
  return out.str();
}

inline void explain_node(const PhysicalPlan& plan, const PlanNode& node, std::ostream& out,
                         int depth, bool resharded) {
  for (int i = 0; i < depth; ++i) out << "  ";
  out << name_of(node.kind);
  if (node.kind == OpKind::DIS) {
    switch (node.leaf.kind) {
      case LeafScan::Kind::Pattern:
        out << " " << name_of(node.leaf.perm) << "/"
            << (node.leaf.group == ShardGroup::SubjectKey ? "s" : "o") << " prefix="
            << node.leaf.prefix_len;
        break;
      case LeafScan::Kind::Singleton:
        out << " singleton ?" << plan.vars.name_of(node.leaf.col);
        break;
      case LeafScan::Kind::Unbound:
        out << " unbound ?" << plan.vars.name_of(node.leaf.col);
        break;
    }
  }
  if (!node.conditions.empty()) {
    out << " [";
    for (std::size_t i = 0; i < node.conditions.size(); ++i) {
      if (i) out << ", ";
      out << describe(plan, node.conditions[i]);
    }
    out << "]";
  }
  out << " card=" << node.est_card << " cost=" << node.est_cost;
  if (node.shard_key != kNoVar) out << " shard=?" << plan.vars.name_of(node.shard_key);
  if (resharded) out << " (resharded)";
  out << "\n";
  for (std::size_t i = 0; i < node.children.size(); ++i)
    explain_node(plan, *node.children[i], out, depth + 1, node.reshard_child[i]);
}

inline std::string explain(const PhysicalPlan& plan) {
  std::ostringstream out;
  explain_node(plan, *plan.root, out, 0, false);
  return out.str();
}

inline void plan_dot_node(const PhysicalPlan& plan, const PlanNode& node, std::ostream& out) {
  out << "  n" << node.op_id << " [label=\"" << name_of(node.kind) << "\\ncard=" << node.est_card
      << "\\ncost=" << node.est_cost << "\"];\n";
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    out << "  n" << node.op_id << " -> n" << node.children[i]->op_id;
    if (node.reshard_child[i]) out << " [label=\"reshard\"]";
    out << ";\n";
    plan_dot_node(plan, *node.children[i], out);
  }
}

inline std::string to_dot(const PhysicalPlan& plan) {
  std::ostringstream out;
  out << "digraph plan {\n";
  plan_dot_node(plan, *plan.root, out);
  out << "}\n";
  return out.str();
}

}  // namespace pathjoin
