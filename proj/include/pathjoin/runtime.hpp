#pragma once

#include <algorithm>
#include <atomic>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pathjoin/optimizer.hpp"
#include "pathjoin/reach_index.hpp"
#include "pathjoin/relation.hpp"
#include "pathjoin/transport.hpp"
#include "pathjoin/triple_index.hpp"

namespace pathjoin {

// Distributed execution: one worker context per partition, each evaluating
// the shared plan over its local indexes. Join inputs reshard through the
// transport per plan marks; every reach condition costs exactly one
// frontier-exchange round regardless of graph diameter.

struct WorkerState {
  int partition = 0;
  PartitionIndexes indexes;
  std::map<TermId, CompoundDag> reach;   // per property
  std::vector<TermId> owned_vertices;    // owned V_D, sorted

  const CompoundDag* dag_of(TermId p) const {
    auto it = reach.find(p);
    return it == reach.end() ? nullptr : &it->second;
  }

  bool owns_vertex(TermId v) const {
    return std::binary_search(owned_vertices.begin(), owned_vertices.end(), v);
  }
};

// ---- message audit ----

struct ConditionAudit {
  int frontier_rounds = 0;        // must be exactly 1 per executed condition (k > 1)
  int setup_reshard_rounds = 0;   // internal per-condition relation reshards
};

struct OperatorAudit {
  std::vector<int> child_reshard_rounds;
  std::map<int, ConditionAudit> conditions;  // by condition index
};

struct QueryAudit {
  std::map<int, OperatorAudit> operators;  // by op id
  std::uint64_t messages = 0;

  int total_frontier_rounds() const {
    int n = 0;
    for (const auto& [op, oa] : operators) {
      (void)op;
      for (const auto& [c, ca] : oa.conditions) {
        (void)c;
        n += ca.frontier_rounds;
      }
    }
    return n;
  }
};

namespace rdetail {

// per-worker round tallies, aggregated as max over workers
class AuditCollector {
 public:
  explicit AuditCollector(int workers) : workers_(workers) {}

  void note_child_reshard(int op, int child, int worker) {
    std::lock_guard lock(mutex_);
    auto& v = child_[op][child];
    v.resize(workers_, 0);
    ++v[worker];
  }

  void note_frontier(int op, int cond, int worker) {
    std::lock_guard lock(mutex_);
    auto& v = frontier_[op][cond];
    v.resize(workers_, 0);
    ++v[worker];
  }

  void note_setup(int op, int cond, int worker) {
    std::lock_guard lock(mutex_);
    auto& v = setup_[op][cond];
    v.resize(workers_, 0);
    ++v[worker];
  }

  QueryAudit finish() const {
    QueryAudit a;
    auto max_of = [](const std::vector<int>& v) {
      int m = 0;
      for (int x : v) m = std::max(m, x);
      return m;
    };
    for (const auto& [op, children] : child_) {
      auto& oa = a.operators[op];
      for (const auto& [child, v] : children) {
        if (static_cast<int>(oa.child_reshard_rounds.size()) <= child)
          oa.child_reshard_rounds.resize(child + 1, 0);
        oa.child_reshard_rounds[child] = max_of(v);
      }
    }
    for (const auto& [op, conds] : frontier_) {
      auto& oa = a.operators[op];
      for (const auto& [c, v] : conds) oa.conditions[c].frontier_rounds = max_of(v);
    }
    for (const auto& [op, conds] : setup_) {
      auto& oa = a.operators[op];
      for (const auto& [c, v] : conds) oa.conditions[c].setup_reshard_rounds = max_of(v);
    }
    return a;
  }

 private:
  int workers_;
  mutable std::mutex mutex_;
  std::map<int, std::map<int, std::vector<int>>> child_;
  std::map<int, std::map<int, std::vector<int>>> frontier_;
  std::map<int, std::map<int, std::vector<int>>> setup_;
};

struct ExecContext {
  const PhysicalPlan& plan;
  const std::vector<WorkerState>& workers;
  const PartitionAssignment& assign;
  Transport& transport;
  std::uint64_t query_id;
  AuditCollector& audit;

  int k() const { return static_cast<int>(workers.size()); }
  int owner(TermId v) const { return assign.owner_of(v); }
};

// channel layout within an operator's 16-bit channel space
inline int reshard_channel(int child) { return 1 + child; }
inline int frontier_channel(int cond) { return 8 + 3 * cond; }
inline int tuples_channel(int cond) { return 9 + 3 * cond; }
inline int filter_reshard_channel(int cond) { return 10 + 3 * cond; }
inline constexpr int kResultChannel = 0x7fff;

// ---- payload encoding ----

inline void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.insert(buf.end(), reinterpret_cast<const std::uint8_t*>(&v),
             reinterpret_cast<const std::uint8_t*>(&v) + 4);
}

inline std::uint32_t get_u32(const std::uint8_t*& p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  p += 4;
  return v;
}

inline std::vector<std::uint8_t> encode_rows(std::uint32_t width, const std::vector<TermId>& rows,
                                             std::optional<std::uint32_t> nrows = std::nullopt) {
  std::vector<std::uint8_t> out;
  const std::uint32_t n =
      nrows ? *nrows : (width ? static_cast<std::uint32_t>(rows.size() / width) : 0);
  out.reserve(8 + rows.size() * 4);
  put_u32(out, width);
  put_u32(out, n);
  for (TermId id : rows) put_u32(out, id);
  return out;
}

inline void decode_rows_into(const std::vector<std::uint8_t>& payload, Relation& rel) {
  const std::uint8_t* p = payload.data();
  std::uint32_t width = get_u32(p);
  std::uint32_t n = get_u32(p);
  if (width != rel.width())
    throw RuntimeError("tuple batch width mismatch");
  for (std::uint32_t i = 0; i < n * width; ++i) rel.rows.push_back(get_u32(p));
  rel.count += n;
}

// one frontier record: a source value plus its reached in-virtuals (members
// annotated); class_idx 0xffffffff carries direct neighbors for `?`
struct FrontierRecord {
  TermId source = 0;
  std::vector<std::pair<std::uint32_t, std::vector<TermId>>> entries;
};

inline std::vector<std::uint8_t> encode_frontiers(const std::vector<FrontierRecord>& records) {
  std::vector<std::uint8_t> out;
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    put_u32(out, r.source);
    put_u32(out, static_cast<std::uint32_t>(r.entries.size()));
    for (const auto& [cls, members] : r.entries) {
      put_u32(out, cls);
      put_u32(out, static_cast<std::uint32_t>(members.size()));
      for (TermId m : members) put_u32(out, m);
    }
  }
  return out;
}

inline std::vector<FrontierRecord> decode_frontiers(const std::vector<std::uint8_t>& payload) {
  const std::uint8_t* p = payload.data();
  std::vector<FrontierRecord> out(get_u32(p));
  for (auto& r : out) {
    r.source = get_u32(p);
    r.entries.resize(get_u32(p));
    for (auto& [cls, members] : r.entries) {
      cls = get_u32(p);
      members.resize(get_u32(p));
      for (auto& m : members) m = get_u32(p);
    }
  }
  return out;
}

// ---- reshard ----

inline Relation reshard(Relation in, VarId key, int op, int channel, int worker,
                        ExecContext& ctx, bool count_as_child_reshard, int audit_idx) {
  const int k = ctx.k();
  if (k == 1 || in.shard_key == key) {
    in.shard_key = key;
    return in;
  }
  int col = in.col_of(key);
  if (col < 0) throw RuntimeError("reshard key missing from schema");
  if (count_as_child_reshard)
    ctx.audit.note_child_reshard(op, audit_idx, worker);
  else
    ctx.audit.note_setup(op, audit_idx, worker);

  Relation out;
  out.schema = in.schema;
  out.shard_key = key;
  std::vector<std::vector<TermId>> buckets(k);
  for (std::size_t r = 0; r < in.count; ++r) {
    auto row = in.row(r);
    int dest = ctx.owner(row[col]);
    if (dest == worker) {
      out.add_row(row);
    } else {
      buckets[dest].insert(buckets[dest].end(), row.begin(), row.end());
    }
  }
  const std::uint32_t sid = stream_id(op, channel);
  for (int peer = 0; peer < k; ++peer) {
    if (peer == worker) continue;
    constexpr std::size_t kBatchRows = 4096;
    const std::size_t width = in.width();
    const auto& bucket = buckets[peer];
    std::size_t nrows = width ? bucket.size() / width : 0;
    for (std::size_t start = 0; start < nrows; start += kBatchRows) {
      std::size_t end = std::min(nrows, start + kBatchRows);
      std::vector<TermId> chunk(bucket.begin() + start * width, bucket.begin() + end * width);
      ctx.transport.send(peer, {MsgKind::TupleBatch, ctx.query_id, sid,
                                static_cast<std::uint16_t>(worker),
                                encode_rows(static_cast<std::uint32_t>(width), chunk)});
    }
    ctx.transport.send(peer, {MsgKind::EndOfStream, ctx.query_id, sid,
                              static_cast<std::uint16_t>(worker), {}});
  }
  for (int peer = 0; peer < k; ++peer) {
    if (peer == worker) continue;
    while (true) {
      Message m = ctx.transport.mailbox(worker).pop(ctx.query_id, sid,
                                                    static_cast<std::uint16_t>(peer));
      if (m.kind == MsgKind::EndOfStream) break;
      decode_rows_into(m.payload, out);
    }
  }
  return out;
}

// ---- scans ----

inline bool zero_length_holds(TermId v, TermId property, const WorkerState& w, StarScope scope) {
  if (v == kInvalidTerm) return false;
  if (scope == StarScope::Vd) return w.owns_vertex(v);
  const CompoundDag* dag = w.dag_of(property);
  return dag && dag->is_local_vertex(v);
}

inline Relation exec_dis(const PlanNode& n, int worker, ExecContext& ctx) {
  const WorkerState& w = ctx.workers[worker];
  Relation out;
  out.schema = n.schema;
  out.shard_key = n.shard_key;

  switch (n.leaf.kind) {
    case LeafScan::Kind::Singleton: {
      TermId c = n.leaf.constant;
      if (ctx.owner(c) == worker) {
        TermId row[1] = {c};
        out.add_row(row);
      }
      return out;
    }
    case LeafScan::Kind::Unbound: {
      if (ctx.plan.scope == StarScope::Vd) {
        for (TermId v : w.owned_vertices) {
          TermId row[1] = {v};
          out.add_row(row);
        }
      } else {
        // intersection of the incident properties' local vertex sets
        std::vector<TermId> domain;
        bool first = true;
        for (TermId p : n.leaf.domain_props) {
          const CompoundDag* dag = w.dag_of(p);
          std::vector<TermId> local =
              dag ? dag->local_vertices : std::vector<TermId>{};
          if (first) {
            domain = std::move(local);
            first = false;
          } else {
            std::vector<TermId> merged;
            std::set_intersection(domain.begin(), domain.end(), local.begin(), local.end(),
                                  std::back_inserter(merged));
            domain = std::move(merged);
          }
        }
        for (TermId v : domain) {
          TermId row[1] = {v};
          out.add_row(row);
        }
      }
      return out;
    }
    case LeafScan::Kind::Pattern:
      break;
  }

  const PermutationIndex& idx = w.indexes.index(n.leaf.perm);
  const auto& ord = component_order(n.leaf.perm);
  ScanPattern key;
  for (int i = 0; i < n.leaf.prefix_len; ++i) key.prefix.push_back(n.leaf.const_val[ord[i]]);

  // residual constants beyond the prefix plus repeated-variable equality
  std::vector<std::pair<int, TermId>> residual;
  for (int pos = 0; pos < 3; ++pos) {
    bool in_prefix = false;
    for (int i = 0; i < n.leaf.prefix_len; ++i) in_prefix |= ord[i] == pos;
    if (n.leaf.is_const[pos] && !in_prefix) residual.emplace_back(pos, n.leaf.const_val[pos]);
  }
  bool repeated = n.leaf.var_at[0] != kNoVar && n.leaf.var_at[0] == n.leaf.var_at[2];

  std::vector<TermId> row(out.width());
  for (const auto& prow : idx.scan(key)) {
    EncodedTriple t = unpermute(prow, n.leaf.perm);
    const TermId field[3] = {t.s, t.p, t.o};
    bool ok = true;
    for (const auto& [pos, val] : residual) ok &= field[pos] == val;
    if (repeated) ok &= t.s == t.o;
    if (!ok) continue;
    for (std::size_t c = 0; c < out.schema.size(); ++c) {
      VarId v = out.schema[c];
      row[c] = v == n.leaf.var_at[0] ? t.s : v == n.leaf.var_at[1] ? t.p : t.o;
    }
    out.add_row(row);
  }
  return out;
}

// ---- equi joins ----

inline void sort_relation(Relation& rel, VarId primary) {
  int col = rel.col_of(primary);
  if (col < 0 || rel.count == 0) return;
  std::vector<std::size_t> order(rel.count);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = rel.row(a), rb = rel.row(b);
    if (ra[col] != rb[col]) return ra[col] < rb[col];
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::vector<TermId> sorted;
  sorted.reserve(rel.rows.size());
  for (std::size_t i : order) {
    auto r = rel.row(i);
    sorted.insert(sorted.end(), r.begin(), r.end());
  }
  rel.rows = std::move(sorted);
}

inline std::vector<VarId> equi_vars(const PlanNode& n) {
  std::vector<VarId> vars;
  for (const auto& c : n.conditions) {
    if (c.kind != PlanCondition::Kind::Equi) continue;
    if (std::find(vars.begin(), vars.end(), c.var) == vars.end()) vars.push_back(c.var);
  }
  return vars;
}

inline Relation join_rows(const PlanNode& n, const Relation& left, const Relation& right,
                          const std::vector<std::pair<std::size_t, std::size_t>>& matches) {
  Relation out;
  out.schema = n.schema;
  out.shard_key = n.shard_key;
  std::vector<int> right_extra;  // right columns not already in left
  for (std::size_t c = 0; c < right.schema.size(); ++c)
    if (left.col_of(right.schema[c]) < 0) right_extra.push_back(static_cast<int>(c));
  std::vector<TermId> row(out.width());
  for (const auto& [li, ri] : matches) {
    auto lr = left.row(li);
    auto rr = right.row(ri);
    std::copy(lr.begin(), lr.end(), row.begin());
    std::size_t at = lr.size();
    for (int c : right_extra) row[at++] = rr[c];
    out.add_row(row);
  }
  return out;
}

inline Relation exec_equi_join(const PlanNode& n, Relation left, Relation right, int worker,
                               ExecContext& ctx) {
  bool left_resharded = n.reshard_child[0] && ctx.k() > 1;
  bool right_resharded = n.reshard_child[1] && ctx.k() > 1;
  if (n.reshard_child[0])
    left = reshard(std::move(left), n.join_var, n.op_id, reshard_channel(0), worker, ctx, true, 0);
  if (n.reshard_child[1])
    right = reshard(std::move(right), n.join_var, n.op_id, reshard_channel(1), worker, ctx, true, 1);

  auto vars = equi_vars(n);
  const VarId v = n.join_var;
  int lc = left.col_of(v), rc = right.col_of(v);
  if (lc < 0 || rc < 0) throw RuntimeError("join variable missing from operands");

  std::vector<std::pair<int, int>> residual;  // (left col, right col) for other vars
  for (VarId ev : vars) {
    if (ev == v) continue;
    residual.emplace_back(left.col_of(ev), right.col_of(ev));
  }

  std::vector<std::pair<std::size_t, std::size_t>> matches;
  if (n.kind == OpKind::DMJ) {
    // resharding interleaves sender streams, so those inputs are re-sorted;
    // anything else must already arrive sorted per plan contract
    auto check_sorted = [&](const Relation& rel, int col) {
      for (std::size_t r = 1; r < rel.count; ++r)
        if (rel.row(r)[col] < rel.row(r - 1)[col])
          throw RuntimeError("merge join input violates sort contract");
    };
    if (left_resharded)
      sort_relation(left, v);
    else
      check_sorted(left, lc);
    if (right_resharded)
      sort_relation(right, v);
    else
      check_sorted(right, rc);
    std::size_t i = 0, j = 0;
    while (i < left.count && j < right.count) {
      TermId a = left.row(i)[lc], b = right.row(j)[rc];
      if (a < b) {
        ++i;
      } else if (b < a) {
        ++j;
      } else {
        std::size_t i2 = i, j2 = j;
        while (i2 < left.count && left.row(i2)[lc] == a) ++i2;
        while (j2 < right.count && right.row(j2)[rc] == a) ++j2;
        for (std::size_t x = i; x < i2; ++x)
          for (std::size_t y = j; y < j2; ++y) matches.emplace_back(x, y);
        i = i2;
        j = j2;
      }
    }
  } else {
    std::unordered_map<TermId, std::vector<std::size_t>> table;
    for (std::size_t r = 0; r < right.count; ++r) table[right.row(r)[rc]].push_back(r);
    for (std::size_t l = 0; l < left.count; ++l) {
      auto it = table.find(left.row(l)[lc]);
      if (it == table.end()) continue;
      for (std::size_t r : it->second) matches.emplace_back(l, r);
    }
  }
  // residual equality on every other shared variable
  if (!residual.empty()) {
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    for (const auto& [l, r] : matches) {
      bool ok = true;
      for (const auto& [lcol, rcol] : residual)
        ok &= left.row(l)[lcol] == right.row(r)[rcol];
      if (ok) kept.emplace_back(l, r);
    }
    matches = std::move(kept);
  }
  return join_rows(n, left, right, matches);
}

// ---- reachability machinery ----

// (s,t) decisions for locally-owned source and target value sets under one
// modifier. Values outside V^p participate only through zero-length paths.
inline std::set<std::pair<TermId, TermId>> decide_local_pairs(
    const CompoundDag* dag, const std::vector<TermId>& sources,
    const std::vector<TermId>& targets, const PlanCondition& cond, const WorkerState& w,
    StarScope scope) {
  std::set<std::pair<TermId, TermId>> pairs;
  if (cond.mod == PathMod::Opt) {
    std::set<TermId> tset(targets.begin(), targets.end());
    for (TermId s : sources) {
      if (dag) {
        for (TermId t : dag->out_neighbors(s))
          if (tset.count(t)) pairs.emplace(s, t);
      }
      if (tset.count(s) && zero_length_holds(s, cond.property, w, scope)) pairs.emplace(s, s);
    }
    return pairs;
  }
  if (dag) {
    for (const auto& [s, t] : dag->local_set_reach(sources, targets)) {
      if (s != t) pairs.emplace(s, t);
    }
  }
  if (cond.mod == PathMod::Star) {
    std::set<TermId> tset(targets.begin(), targets.end());
    for (TermId s : sources)
      if (tset.count(s) && zero_length_holds(s, cond.property, w, scope)) pairs.emplace(s, s);
  }
  return pairs;
}

// frontier records toward each remote partition for the given sources
inline std::vector<std::vector<FrontierRecord>> build_frontiers(
    const CompoundDag* dag, const std::vector<TermId>& sources, const PlanCondition& cond,
    ExecContext& ctx) {
  std::vector<std::vector<FrontierRecord>> per_peer(ctx.k());
  if (cond.mod == PathMod::Opt) {
    if (!dag) return per_peer;
    for (TermId s : sources) {
      std::vector<std::vector<TermId>> neigh(ctx.k());
      for (TermId t : dag->out_neighbors(s)) {
        int o = ctx.owner(t);
        if (o != dag->partition) neigh[o].push_back(t);
      }
      for (int peer = 0; peer < ctx.k(); ++peer) {
        if (neigh[peer].empty()) continue;
        per_peer[peer].push_back({s, {{0xffffffffu, std::move(neigh[peer])}}});
      }
    }
    return per_peer;
  }
  if (!dag) return per_peer;
  for (auto& [s, frontier] : dag->reach_frontier(sources)) {
    std::vector<std::vector<std::pair<std::uint32_t, std::vector<TermId>>>> grouped(ctx.k());
    for (auto& fc : frontier) grouped[fc.partition].push_back({fc.class_idx, std::move(fc.members)});
    for (int peer = 0; peer < ctx.k(); ++peer) {
      if (grouped[peer].empty()) continue;
      per_peer[peer].push_back({s, std::move(grouped[peer])});
    }
  }
  return per_peer;
}

// target-side decisions: which of the locally-owned targets does each
// received source reach, via membership expansion plus local reach
inline std::map<TermId, std::vector<TermId>> decide_from_frontiers(
    const std::vector<FrontierRecord>& records, const std::vector<TermId>& targets,
    const PlanCondition& cond, const WorkerState& w) {
  std::map<TermId, std::vector<TermId>> reached;  // source -> targets
  if (records.empty() || targets.empty()) return reached;
  const CompoundDag* dag = w.dag_of(cond.property);
  if (cond.mod == PathMod::Opt) {
    std::set<TermId> tset(targets.begin(), targets.end());
    for (const auto& r : records) {
      std::set<TermId> hit;
      for (const auto& [cls, members] : r.entries) {
        (void)cls;
        for (TermId t : members)
          if (tset.count(t)) hit.insert(t);
      }
      if (!hit.empty()) reached[r.source].assign(hit.begin(), hit.end());
    }
    return reached;
  }
  if (!dag) return reached;
  // batch: reach pairs from all mentioned members to all targets
  std::vector<TermId> members;
  for (const auto& r : records)
    for (const auto& [cls, ms] : r.entries) {
      (void)cls;
      members.insert(members.end(), ms.begin(), ms.end());
    }
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  auto pairs = dag->local_set_reach(members, targets);
  std::map<TermId, std::vector<TermId>> member_reaches;
  for (const auto& [m, t] : pairs) member_reaches[m].push_back(t);
  for (const auto& r : records) {
    std::set<TermId> hit;
    for (const auto& [cls, ms] : r.entries) {
      (void)cls;
      for (TermId m : ms) {
        auto it = member_reaches.find(m);
        if (it == member_reaches.end()) continue;
        hit.insert(it->second.begin(), it->second.end());
      }
    }
    if (!hit.empty()) reached[r.source].assign(hit.begin(), hit.end());
  }
  return reached;
}

// One distributed reach condition evaluated as a filter over a relation that
// already contains both endpoint columns: reshard by the source variable,
// decide locally where the target is owned, ship rows plus frontiers to the
// target owner otherwise. One frontier round.
inline Relation reach_filter(Relation rel, const PlanCondition& cond, const PlanNode& n,
                             int cond_idx, int worker, ExecContext& ctx) {
  const WorkerState& w = ctx.workers[worker];
  rel = reshard(std::move(rel), cond.source, n.op_id, filter_reshard_channel(cond_idx), worker,
                ctx, false, cond_idx);
  int scol = rel.col_of(cond.source), tcol = rel.col_of(cond.target);
  if (scol < 0 || tcol < 0) throw RuntimeError("reach filter variables missing from schema");

  Relation out;
  out.schema = rel.schema;
  out.shard_key = cond.target;

  const CompoundDag* dag = w.dag_of(cond.property);

  // split rows into locally-decidable and remote-target
  std::vector<TermId> local_sources, local_targets;
  std::vector<std::size_t> local_rows;
  std::vector<std::vector<std::size_t>> remote_rows(ctx.k());
  std::vector<std::vector<TermId>> remote_sources(ctx.k());
  for (std::size_t r = 0; r < rel.count; ++r) {
    TermId t = rel.row(r)[tcol];
    int o = t == kInvalidTerm ? worker : ctx.owner(t);
    if (o == worker || ctx.k() == 1) {
      local_rows.push_back(r);
      local_sources.push_back(rel.row(r)[scol]);
      local_targets.push_back(t);
    } else {
      remote_rows[o].push_back(r);
      remote_sources[o].push_back(rel.row(r)[scol]);
    }
  }

  auto dedup = [](std::vector<TermId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedup(local_sources);
  dedup(local_targets);
  auto local_pairs = decide_local_pairs(dag, local_sources, local_targets, cond, w,
                                        ctx.plan.scope);
  for (std::size_t r : local_rows) {
    auto row = rel.row(r);
    if (local_pairs.count({row[scol], row[tcol]})) out.add_row(row);
  }

  if (ctx.k() > 1) {
    ctx.audit.note_frontier(n.op_id, cond_idx, worker);
    const std::uint32_t fsid = stream_id(n.op_id, frontier_channel(cond_idx));
    const std::uint32_t tsid = stream_id(n.op_id, tuples_channel(cond_idx));
    for (int peer = 0; peer < ctx.k(); ++peer) {
      if (peer == worker) continue;
      std::vector<TermId> srcs = remote_sources[peer];
      dedup(srcs);
      auto frontiers = build_frontiers(dag, srcs, cond, ctx);
      ctx.transport.send(peer, {MsgKind::FrontierBatch, ctx.query_id, fsid,
                                static_cast<std::uint16_t>(worker),
                                encode_frontiers(frontiers[peer])});
      std::vector<TermId> ship;
      for (std::size_t r : remote_rows[peer]) {
        auto row = rel.row(r);
        ship.insert(ship.end(), row.begin(), row.end());
      }
      ctx.transport.send(peer, {MsgKind::TupleBatch, ctx.query_id, tsid,
                                static_cast<std::uint16_t>(worker),
                                encode_rows(static_cast<std::uint32_t>(rel.width()), ship)});
      ctx.transport.send(peer, {MsgKind::EndOfStream, ctx.query_id, tsid,
                                static_cast<std::uint16_t>(worker), {}});
    }
    for (int peer = 0; peer < ctx.k(); ++peer) {
      if (peer == worker) continue;
      Message fm = ctx.transport.mailbox(worker).pop(ctx.query_id, fsid,
                                                     static_cast<std::uint16_t>(peer));
      auto records = decode_frontiers(fm.payload);
      Relation incoming;
      incoming.schema = rel.schema;
      while (true) {
        Message tm = ctx.transport.mailbox(worker).pop(ctx.query_id, tsid,
                                                       static_cast<std::uint16_t>(peer));
        if (tm.kind == MsgKind::EndOfStream) break;
        decode_rows_into(tm.payload, incoming);
      }
      std::vector<TermId> tset;
      for (std::size_t r = 0; r < incoming.count; ++r) tset.push_back(incoming.row(r)[tcol]);
      dedup(tset);
      auto reached = decide_from_frontiers(records, tset, cond, w);
      std::map<TermId, std::set<TermId>> reach_sets;
      for (auto& [s, ts] : reached) reach_sets[s] = std::set<TermId>(ts.begin(), ts.end());
      for (std::size_t r = 0; r < incoming.count; ++r) {
        auto row = incoming.row(r);
        auto it = reach_sets.find(row[scol]);
        if (it != reach_sets.end() && it->second.count(row[tcol])) out.add_row(row);
      }
    }
  }
  return out;
}

// Binary DRJ: the first reach condition is the distributed join (frontiers
// plus piggybacked source-side tuples in one round, decisions and emission
// at target owners); equi conditions filter candidate pairs; the remaining
// reach conditions run as filters over the joined relation.
inline Relation exec_drj(const PlanNode& n, std::vector<Relation> inputs, int worker,
                         ExecContext& ctx) {
  const WorkerState& w = ctx.workers[worker];
  std::vector<const PlanCondition*> reach;
  for (const auto& c : n.conditions)
    if (c.kind == PlanCondition::Kind::Reach) reach.push_back(&c);
  if (reach.empty()) throw RuntimeError("DRJ without reach conditions");

  if (n.children.size() == 1) {
    Relation rel = std::move(inputs[0]);
    if (n.reshard_child[0])
      rel = reshard(std::move(rel), reach[0]->source, n.op_id, reshard_channel(0), worker, ctx,
                    true, 0);
    for (std::size_t i = 0; i < reach.size(); ++i)
      rel = reach_filter(std::move(rel), *reach[i], n, static_cast<int>(i), worker, ctx);
    return rel;
  }

  const PlanCondition& c0 = *reach[0];
  Relation src_rel = std::move(inputs[n.drj_source_left ? 0 : 1]);
  Relation tgt_rel = std::move(inputs[n.drj_source_left ? 1 : 0]);
  int src_child = n.drj_source_left ? 0 : 1;
  int tgt_child = 1 - src_child;
  if (n.reshard_child[src_child])
    src_rel = reshard(std::move(src_rel), c0.source, n.op_id, reshard_channel(src_child), worker,
                      ctx, true, src_child);
  if (n.reshard_child[tgt_child])
    tgt_rel = reshard(std::move(tgt_rel), c0.target, n.op_id, reshard_channel(tgt_child), worker,
                      ctx, true, tgt_child);

  int scol = src_rel.col_of(c0.source), tcol = tgt_rel.col_of(c0.target);
  if (scol < 0 || tcol < 0) throw RuntimeError("DRJ endpoint variables missing");

  // equi conditions between the two sides
  std::vector<std::pair<int, int>> equi;  // (src col, tgt col)
  for (VarId v : equi_vars(n)) {
    int a = src_rel.col_of(v), b = tgt_rel.col_of(v);
    if (a >= 0 && b >= 0) equi.emplace_back(a, b);
  }

  std::map<TermId, std::vector<std::size_t>> src_groups, tgt_groups;
  for (std::size_t r = 0; r < src_rel.count; ++r) src_groups[src_rel.row(r)[scol]].push_back(r);
  for (std::size_t r = 0; r < tgt_rel.count; ++r) tgt_groups[tgt_rel.row(r)[tcol]].push_back(r);
  std::vector<TermId> sources, targets;
  for (const auto& [s, rs] : src_groups) {
    (void)rs;
    sources.push_back(s);
  }
  for (const auto& [t, rs] : tgt_groups) {
    (void)rs;
    targets.push_back(t);
  }

  const CompoundDag* dag = w.dag_of(c0.property);

  // output schema follows (left, right) orientation, not (source, target)
  const Relation& left = n.drj_source_left ? src_rel : tgt_rel;
  const Relation& right = n.drj_source_left ? tgt_rel : src_rel;
  Relation out;
  out.schema = n.schema;
  out.shard_key = n.shard_key;
  std::vector<int> right_extra;
  for (std::size_t c = 0; c < right.schema.size(); ++c)
    if (left.col_of(right.schema[c]) < 0) right_extra.push_back(static_cast<int>(c));

  auto emit = [&](std::size_t src_row, std::size_t tgt_row) {
    auto sr = src_rel.row(src_row);
    auto tr = tgt_rel.row(tgt_row);
    for (const auto& [a, b] : equi)
      if (sr[a] != tr[b]) return;
    auto lr = n.drj_source_left ? sr : tr;
    auto rr = n.drj_source_left ? tr : sr;
    std::vector<TermId> row(out.width());
    std::copy(lr.begin(), lr.end(), row.begin());
    std::size_t at = lr.size();
    for (int c : right_extra) row[at++] = rr[c];
    out.add_row(row);
  };

  // local pairs
  auto local_pairs = decide_local_pairs(dag, sources, targets, c0, w, ctx.plan.scope);
  for (const auto& [s, t] : local_pairs) {
    for (std::size_t sr : src_groups[s])
      for (std::size_t tr : tgt_groups[t]) emit(sr, tr);
  }

  if (ctx.k() > 1) {
    ctx.audit.note_frontier(n.op_id, 0, worker);
    const std::uint32_t fsid = stream_id(n.op_id, frontier_channel(0));
    const std::uint32_t tsid = stream_id(n.op_id, tuples_channel(0));
    auto frontiers = build_frontiers(dag, sources, c0, ctx);
    for (int peer = 0; peer < ctx.k(); ++peer) {
      if (peer == worker) continue;
      ctx.transport.send(peer, {MsgKind::FrontierBatch, ctx.query_id, fsid,
                                static_cast<std::uint16_t>(worker),
                                encode_frontiers(frontiers[peer])});
      // ship the src rows whose source value has a frontier toward the peer
      std::vector<TermId> ship;
      for (const auto& record : frontiers[peer]) {
        for (std::size_t r : src_groups[record.source]) {
          auto row = src_rel.row(r);
          ship.insert(ship.end(), row.begin(), row.end());
        }
      }
      ctx.transport.send(peer, {MsgKind::TupleBatch, ctx.query_id, tsid,
                                static_cast<std::uint16_t>(worker),
                                encode_rows(static_cast<std::uint32_t>(src_rel.width()), ship)});
      ctx.transport.send(peer, {MsgKind::EndOfStream, ctx.query_id, tsid,
                                static_cast<std::uint16_t>(worker), {}});
    }
    for (int peer = 0; peer < ctx.k(); ++peer) {
      if (peer == worker) continue;
      Message fm = ctx.transport.mailbox(worker).pop(ctx.query_id, fsid,
                                                     static_cast<std::uint16_t>(peer));
      auto records = decode_frontiers(fm.payload);
      Relation incoming;
      incoming.schema = src_rel.schema;
      while (true) {
        Message tm = ctx.transport.mailbox(worker).pop(ctx.query_id, tsid,
                                                       static_cast<std::uint16_t>(peer));
        if (tm.kind == MsgKind::EndOfStream) break;
        decode_rows_into(tm.payload, incoming);
      }
      auto reached = decide_from_frontiers(records, targets, c0, w);
      std::map<TermId, std::vector<std::size_t>> incoming_groups;
      for (std::size_t r = 0; r < incoming.count; ++r)
        incoming_groups[incoming.row(r)[scol]].push_back(r);
      for (const auto& [s, ts] : reached) {
        auto git = incoming_groups.find(s);
        if (git == incoming_groups.end()) continue;
        for (TermId t : ts) {
          auto tg = tgt_groups.find(t);
          if (tg == tgt_groups.end()) continue;
          for (std::size_t sr : git->second) {
            auto srow = incoming.row(sr);
            auto trow_emit = [&](std::size_t tr) {
              auto trr = tgt_rel.row(tr);
              for (const auto& [a, b] : equi)
                if (srow[a] != trr[b]) return;
              auto lr = n.drj_source_left ? srow : trr;
              auto rr = n.drj_source_left ? trr : srow;
              std::vector<TermId> row(out.width());
              std::copy(lr.begin(), lr.end(), row.begin());
              std::size_t at = lr.size();
              for (int c : right_extra) row[at++] = rr[c];
              out.add_row(row);
            };
            for (std::size_t tr : tg->second) trow_emit(tr);
          }
        }
      }
    }
  }

  // remaining reach conditions filter the joined relation
  Relation rel = std::move(out);
  for (std::size_t i = 1; i < reach.size(); ++i)
    rel = reach_filter(std::move(rel), *reach[i], n, static_cast<int>(i), worker, ctx);
  return rel;
}

inline Relation eval_node(const PlanNode& n, int worker, ExecContext& ctx) {
  switch (n.kind) {
    case OpKind::DIS:
      return exec_dis(n, worker, ctx);
    case OpKind::DMJ:
    case OpKind::DHJ: {
      auto lf = std::async(std::launch::async,
                           [&] { return eval_node(*n.children[0], worker, ctx); });
      Relation right = eval_node(*n.children[1], worker, ctx);
      Relation left = lf.get();
      return exec_equi_join(n, std::move(left), std::move(right), worker, ctx);
    }
    case OpKind::DRJ: {
      std::vector<Relation> inputs;
      if (n.children.size() == 2) {
        auto lf = std::async(std::launch::async,
                             [&] { return eval_node(*n.children[0], worker, ctx); });
        Relation right = eval_node(*n.children[1], worker, ctx);
        inputs.push_back(lf.get());
        inputs.push_back(std::move(right));
      } else {
        inputs.push_back(eval_node(*n.children[0], worker, ctx));
      }
      return exec_drj(n, std::move(inputs), worker, ctx);
    }
  }
  throw RuntimeError("unknown operator kind");
}

}  // namespace rdetail

struct QueryResult {
  std::vector<std::string> var_names;
  std::vector<std::vector<TermId>> rows;  // sorted, distinct
  QueryAudit audit;
};

// Broadcasts the plan to one thread per worker context, runs the execution
// paths, ships root relations to the master, dedupes and projects.
inline QueryResult execute_query(const PhysicalPlan& plan,
                                 const std::vector<WorkerState>& workers,
                                 const PartitionAssignment& assign, Transport& transport,
                                 std::uint64_t query_id) {
  const int k = static_cast<int>(workers.size());
  rdetail::AuditCollector audit(k);
  rdetail::ExecContext ctx{plan, workers, assign, transport, query_id, audit};
  const std::uint64_t messages_before = transport.messages_sent();

  const std::uint32_t result_stream = stream_id(plan.root->op_id, rdetail::kResultChannel);
  std::mutex error_mutex;
  std::exception_ptr first_error;

  std::vector<std::thread> threads;
  threads.reserve(k);
  for (int wkr = 0; wkr < k; ++wkr) {
    threads.emplace_back([&, wkr] {
      try {
        Relation root = rdetail::eval_node(*plan.root, wkr, ctx);
        // project to the user variables worker-side to shrink the shipment
        std::vector<int> cols;
        for (VarId v : plan.projection) cols.push_back(root.col_of(v));
        std::vector<TermId> projected;
        projected.reserve(root.count * cols.size());
        for (std::size_t r = 0; r < root.count; ++r) {
          auto row = root.row(r);
          for (int c : cols) projected.push_back(row[c]);
        }
        transport.send(transport.master_rank(),
                       {MsgKind::TupleBatch, query_id, result_stream,
                        static_cast<std::uint16_t>(wkr),
                        rdetail::encode_rows(static_cast<std::uint32_t>(cols.size()), projected,
                                             static_cast<std::uint32_t>(root.count))});
        transport.send(transport.master_rank(),
                       {MsgKind::EndOfStream, query_id, result_stream,
                        static_cast<std::uint16_t>(wkr), {}});
      } catch (...) {
        {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        transport.abort_all();
      }
    });
  }

  QueryResult result;
  for (VarId v : plan.projection) result.var_names.push_back(plan.vars.name_of(v));
  std::set<std::vector<TermId>> distinct;
  bool nullary_hit = false;
  try {
    Relation sink;
    sink.schema = plan.projection;
    for (int wkr = 0; wkr < k; ++wkr) {
      while (true) {
        Message m = transport.mailbox(transport.master_rank())
                        .pop(query_id, result_stream, static_cast<std::uint16_t>(wkr));
        if (m.kind == MsgKind::EndOfStream) break;
        Relation batch;
        batch.schema = plan.projection;
        rdetail::decode_rows_into(m.payload, batch);
        if (batch.width() == 0) {
          nullary_hit |= batch.count > 0;
        } else {
          for (std::size_t r = 0; r < batch.count; ++r) {
            auto row = batch.row(r);
            distinct.emplace(row.begin(), row.end());
          }
        }
      }
    }
  } catch (...) {
    for (auto& t : threads) t.join();
    transport.reset();
    if (first_error) std::rethrow_exception(first_error);
    throw;
  }
  for (auto& t : threads) t.join();
  if (first_error) {
    transport.reset();
    std::rethrow_exception(first_error);
  }
  result.rows.assign(distinct.begin(), distinct.end());
  if (plan.projection.empty() && nullary_hit) result.rows.push_back({});
  result.audit = audit.finish();
  result.audit.messages = transport.messages_sent() - messages_before;
  return result;
}

}  // namespace pathjoin
