#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pathjoin/dictionary.hpp"
#include "pathjoin/errors.hpp"
#include "pathjoin/gen.hpp"
#include "pathjoin/ntriples.hpp"
#include "pathjoin/oracle.hpp"
#include "pathjoin/optimizer.hpp"
#include "pathjoin/partition.hpp"
#include "pathjoin/query_graph.hpp"
#include "pathjoin/reach_index.hpp"
#include "pathjoin/runtime.hpp"
#include "pathjoin/stats.hpp"
#include "pathjoin/transport.hpp"
#include "pathjoin/triple_index.hpp"

namespace pathjoin {

struct EngineConfig {
  int slaves = 2;
  std::string partition_file;  // empty: mod-k hashing
  std::uint64_t sample_size = 10000;
  std::uint64_t seed = 42;
  StarScope star_scope = StarScope::Vd;
  double gamma = 1.0;
  enum class TransportKind { InProc, Socket } transport = TransportKind::InProc;
  std::uint64_t delay_seed = 0;  // > 0: delay-injecting in-process transport
  bool strict_parse = true;
};

struct LoadSummary {
  std::size_t parsed_triples = 0;
  std::size_t distinct_triples = 0;
  std::size_t terms = 0;
  std::size_t properties = 0;
  std::vector<std::size_t> partition_rows;       // subject+object shard sizes
  std::vector<std::size_t> boundary_vertices;    // per partition, summed over properties
  std::vector<ParseIssue> issues;
};

// Master-side facade: encodes and shards the data, builds per-partition
// triple and reachability indexes, computes statistics, and runs queries
// through the distributed runtime.
class Engine {
 public:
  static Engine load_file(const std::string& path, const EngineConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw StoreError("cannot open data file: " + path);
    Dictionary dict;
    std::vector<ParseIssue> issues;
    std::vector<EncodedTriple> triples;
    std::size_t parsed = parse_ntriples(
        in, dict, cfg.strict_parse, [&](const EncodedTriple& t) { triples.push_back(t); },
        &issues);
    Engine e = from_triples(std::move(dict), std::move(triples), cfg);
    e.summary_.parsed_triples = parsed;
    e.summary_.issues = std::move(issues);
    return e;
  }

  static Engine from_triples(Dictionary dict, std::vector<EncodedTriple> triples,
                             const EngineConfig& cfg) {
    Engine e(cfg);
    e.dict_ = std::move(dict);
    e.triples_ = std::move(triples);
    e.summary_.parsed_triples = e.triples_.size();
    e.assign_ = cfg.partition_file.empty()
                    ? PartitionAssignment(cfg.slaves)
                    : load_partition_file(cfg.partition_file, cfg.slaves, e.dict_);
    e.build();
    return e;
  }

  QueryResult query(const std::string& text) {
    auto plan = plan_query(text);
    return run(plan);
  }

  QueryResult run(const PhysicalPlan& plan) {
    ensure_transport();
    std::uint64_t qid = next_query_id_++;
    return execute_query(plan, workers_, assign_, *transport_, qid);
  }

  PhysicalPlan plan_query(const std::string& text) const {
    auto q = parse_query(text);
    rewrite_paths(q);
    auto g = build_query_graph(q);
    return enumerate_plan(q, g, stats_, dict_, cfg_.slaves, cfg_.gamma, cfg_.star_scope);
  }

  std::string explain_query(const std::string& text) const {
    return explain(plan_query(text));
  }

  std::string query_graph_dot(const std::string& text) const {
    auto q = parse_query(text);
    rewrite_paths(q);
    return to_dot(build_query_graph(q));
  }

  OracleResult oracle_result(const std::string& text) const {
    auto q = parse_query(text);
    rewrite_paths(q);
    return oracle_evaluate(triples_, dict_, q, cfg_.star_scope);
  }

  std::vector<std::vector<std::string>> decode_rows(const QueryResult& r) const {
    std::vector<std::vector<std::string>> out;
    out.reserve(r.rows.size());
    for (const auto& row : r.rows) {
      std::vector<std::string> line;
      line.reserve(row.size());
      for (TermId id : row) line.push_back(to_string(dict_.decode(id)));
      out.push_back(std::move(line));
    }
    return out;
  }

  // ---- store persistence ----

  void save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
      std::ofstream out(dir + "/meta.txt");
      out << "version\t1\n";
      out << "slaves\t" << cfg_.slaves << "\n";
      out << "scope\t" << (cfg_.star_scope == StarScope::Vd ? "vd" : "vp") << "\n";
      out << "gamma\t" << cfg_.gamma << "\n";
      out << "sample\t" << cfg_.sample_size << "\t" << cfg_.seed << "\n";
      out << "partition\t" << (assign_.has_explicit_entries() ? "file" : "hash") << "\n";
    }
    {
      std::ofstream out(dir + "/dict.tsv");
      dict_.save(out);
    }
    {
      std::ofstream out(dir + "/stats.tsv");
      save_stats(out, stats_);
    }
    {
      std::ofstream out(dir + "/triples.bin", std::ios::binary);
      std::uint64_t n = triples_.size();
      out.write(reinterpret_cast<const char*>(&n), 8);
      out.write(reinterpret_cast<const char*>(triples_.data()),
                static_cast<std::streamsize>(n * sizeof(EncodedTriple)));
    }
    if (assign_.has_explicit_entries()) {
      std::ofstream out(dir + "/partition.tsv");
      for (TermId v = 0; v < dict_.size(); ++v)
        out << to_string(dict_.decode(v)) << "\t" << assign_.owner_of(v) << "\n";
    }
    for (int i = 0; i < cfg_.slaves; ++i) {
      std::ofstream out(dir + "/idx_p" + std::to_string(i) + ".bin", std::ios::binary);
      save_indexes(out, workers_[i].indexes);
      std::ofstream rout(dir + "/reach_p" + std::to_string(i) + ".bin", std::ios::binary);
      std::uint64_t np = workers_[i].reach.size();
      rout.write(reinterpret_cast<const char*>(&np), 8);
      for (const auto& [p, dag] : workers_[i].reach) {
        (void)p;
        save_compound(rout, dag);
      }
    }
  }

  static Engine open(const std::string& dir) {
    EngineConfig cfg;
    {
      std::ifstream in(dir + "/meta.txt");
      if (!in) throw StoreError("cannot open store: " + dir);
      std::string key;
      while (in >> key) {
        if (key == "version") {
          int v;
          in >> v;
          if (v != 1) throw StoreError("unsupported store version");
        } else if (key == "slaves") {
          in >> cfg.slaves;
        } else if (key == "scope") {
          std::string s;
          in >> s;
          cfg.star_scope = s == "vp" ? StarScope::Vp : StarScope::Vd;
        } else if (key == "gamma") {
          in >> cfg.gamma;
        } else if (key == "sample") {
          in >> cfg.sample_size >> cfg.seed;
        } else if (key == "partition") {
          std::string mode;
          in >> mode;
          if (mode == "file") cfg.partition_file = dir + "/partition.tsv";
        }
      }
    }
    Engine e(cfg);
    {
      std::ifstream in(dir + "/dict.tsv");
      if (!in) throw StoreError("store is missing dict.tsv");
      e.dict_ = Dictionary::load(in);
    }
    {
      std::ifstream in(dir + "/stats.tsv");
      if (!in) throw StoreError("store is missing stats.tsv");
      e.stats_ = load_stats(in);
    }
    {
      std::ifstream in(dir + "/triples.bin", std::ios::binary);
      if (!in) throw StoreError("store is missing triples.bin");
      std::uint64_t n;
      in.read(reinterpret_cast<char*>(&n), 8);
      e.triples_.resize(n);
      in.read(reinterpret_cast<char*>(e.triples_.data()),
              static_cast<std::streamsize>(n * sizeof(EncodedTriple)));
      if (!in) throw StoreError("triples.bin truncated");
    }
    e.assign_ = cfg.partition_file.empty()
                    ? PartitionAssignment(cfg.slaves)
                    : load_partition_file(cfg.partition_file, cfg.slaves, e.dict_);
    for (int i = 0; i < cfg.slaves; ++i) {
      WorkerState w;
      w.partition = i;
      {
        std::ifstream in(dir + "/idx_p" + std::to_string(i) + ".bin", std::ios::binary);
        if (!in) throw StoreError("store is missing index snapshot for partition " +
                                  std::to_string(i));
        w.indexes = load_indexes(in);
      }
      {
        std::ifstream in(dir + "/reach_p" + std::to_string(i) + ".bin", std::ios::binary);
        if (!in) throw StoreError("store is missing reach snapshot for partition " +
                                  std::to_string(i));
        std::uint64_t np;
        in.read(reinterpret_cast<char*>(&np), 8);
        for (std::uint64_t j = 0; j < np; ++j) {
          CompoundDag dag = load_compound(in);
          w.reach.emplace(dag.property, std::move(dag));
        }
      }
      e.workers_.push_back(std::move(w));
    }
    e.fill_owned_vertices();
    e.fill_summary();
    return e;
  }

  const Dictionary& dict() const { return dict_; }
  const StatsCatalog& stats() const { return stats_; }
  const DataGraphMeta& meta() const { return stats_.meta; }
  const EngineConfig& config() const { return cfg_; }
  const LoadSummary& summary() const { return summary_; }
  const std::vector<EncodedTriple>& triples() const { return triples_; }
  const std::vector<WorkerState>& workers() const { return workers_; }
  const PartitionAssignment& assignment() const { return assign_; }

 private:
  explicit Engine(const EngineConfig& cfg) : cfg_(cfg), assign_(std::max(1, cfg.slaves)) {}

  void ensure_transport() {
    if (transport_) return;
    if (cfg_.delay_seed > 0) {
      transport_ = std::make_unique<DelayTransport>(cfg_.slaves, cfg_.delay_seed);
    } else if (cfg_.transport == EngineConfig::TransportKind::Socket) {
      transport_ = std::make_unique<SocketTransport>(cfg_.slaves);
    } else {
      transport_ = std::make_unique<InProcTransport>(cfg_.slaves);
    }
  }

  void fill_owned_vertices() {
    const int k = cfg_.slaves;
    std::vector<std::set<TermId>> owned(k);
    for (const auto& t : triples_) {
      owned[assign_.owner_of(t.s)].insert(t.s);
      owned[assign_.owner_of(t.o)].insert(t.o);
    }
    for (int i = 0; i < k; ++i)
      workers_[i].owned_vertices.assign(owned[i].begin(), owned[i].end());
  }

  void fill_summary() {
    summary_.distinct_triples =
        std::set<EncodedTriple>(triples_.begin(), triples_.end()).size();
    summary_.terms = dict_.size();
    summary_.properties = stats_.meta.properties.size();
    summary_.partition_rows.clear();
    summary_.boundary_vertices.clear();
    for (const auto& w : workers_) {
      summary_.partition_rows.push_back(w.indexes.index(Permutation::SPO).rows.size() +
                                        w.indexes.index(Permutation::OSP).rows.size());
      std::size_t b = 0;
      for (const auto& [p, dag] : w.reach) {
        (void)p;
        b += dag.boundaries.in_boundary.size() + dag.boundaries.out_boundary.size();
      }
      summary_.boundary_vertices.push_back(b);
    }
  }

  void build() {
    const int k = cfg_.slaves;
    std::vector<std::vector<ShardedTriple>> shards(k);
    for (const auto& t : triples_) {
      auto st = assign_custom(t, assign_);
      shards[st.subject_owner].push_back(st);
      if (st.object_owner != st.subject_owner) shards[st.object_owner].push_back(st);
    }
    workers_.resize(k);
    {
      std::vector<std::future<PartitionIndexes>> futs;
      for (int i = 0; i < k; ++i)
        futs.push_back(std::async(std::launch::async, [&, i] {
          return PartitionIndexes::build(shards[i], i);
        }));
      for (int i = 0; i < k; ++i) {
        workers_[i].partition = i;
        workers_[i].indexes = futs[i].get();
      }
    }
    fill_owned_vertices();

    DataGraphMeta meta = compute_meta(triples_);

    // reachability indexes: per property, boundaries and summaries first,
    // then compound assembly with every remote summary replicated
    std::vector<TermId> props(meta.properties.begin(), meta.properties.end());
    std::vector<std::future<void>> futs;
    std::mutex reach_mutex;
    for (TermId p : props) {
      futs.push_back(std::async(std::launch::async, [&, p] {
        std::vector<PropertySubgraph> subs;
        std::vector<BoundarySets> bounds;
        std::vector<BoundaryCompression> comps;
        std::vector<BipartiteSummary> summaries;
        for (int i = 0; i < k; ++i) {
          subs.push_back(extract_property_subgraph(workers_[i].indexes, p, i));
          bounds.push_back(compute_boundaries(subs[i], assign_));
          comps.push_back(compress_boundaries(subs[i], bounds[i], assign_));
          summaries.push_back(build_bipartite_summary(subs[i], bounds[i], comps[i], assign_));
        }
        for (int i = 0; i < k; ++i) {
          CompoundDag dag = assemble_compound(subs[i], bounds[i], comps[i], summaries, assign_);
          std::lock_guard lock(reach_mutex);
          workers_[i].reach.emplace(p, std::move(dag));
        }
      }));
    }
    for (auto& f : futs) f.get();

    std::vector<StatsFragment> frags;
    for (int i = 0; i < k; ++i) frags.push_back(compute_cardinalities(workers_[i].indexes));
    stats_ = merge_fragments(frags, meta);
    compute_reach_selectivities(stats_, triples_, cfg_.sample_size, cfg_.seed);
    fill_summary();
  }

  EngineConfig cfg_;
  Dictionary dict_;
  std::vector<EncodedTriple> triples_;
  PartitionAssignment assign_;
  std::vector<WorkerState> workers_;
  StatsCatalog stats_;
  LoadSummary summary_;
  std::unique_ptr<Transport> transport_;
  std::uint64_t next_query_id_ = 1;
};

// Formatted message audit for the CLI `--audit` flag.
inline std::string render_audit(const QueryAudit& a) {
  std::ostringstream out;
  out << "messages sent: " << a.messages << "\n";
  for (const auto& [op, oa] : a.operators) {
    out << "operator " << op << ":";
    for (std::size_t c = 0; c < oa.child_reshard_rounds.size(); ++c)
      out << " child" << c << "_reshard_rounds=" << oa.child_reshard_rounds[c];
    for (const auto& [cond, ca] : oa.conditions) {
      out << " cond" << cond << "_frontier_rounds=" << ca.frontier_rounds;
      if (ca.setup_reshard_rounds)
        out << " cond" << cond << "_setup_rounds=" << ca.setup_reshard_rounds;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace pathjoin
