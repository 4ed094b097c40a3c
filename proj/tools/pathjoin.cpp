// pathjoin: distributed in-memory engine for SPARQL triple patterns with
// labeled property paths.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pathjoin/bench.hpp"
#include "pathjoin/engine.hpp"
#include "pathjoin/gen.hpp"
#include "pathjoin/oracle.hpp"

using namespace pathjoin;

namespace {

struct CommonOpts {
  int slaves = 2;
  std::string partition_file;
  std::uint64_t sample_size = 10000;
  std::uint64_t seed = 42;
  std::string star_scope = "vd";
  double gamma = 1.0;
  std::string transport = "inproc";
  bool lenient = false;
  std::string store;

  EngineConfig to_config() const {
    EngineConfig cfg;
    cfg.slaves = slaves;
    cfg.partition_file = partition_file;
    cfg.sample_size = sample_size;
    cfg.seed = seed;
    cfg.star_scope = star_scope == "vp" ? StarScope::Vp : StarScope::Vd;
    cfg.gamma = gamma;
    cfg.transport = transport == "socket" ? EngineConfig::TransportKind::Socket
                                          : EngineConfig::TransportKind::InProc;
    cfg.strict_parse = !lenient;
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--slaves", opts.slaves, "number of partitions / worker contexts");
  cmd->add_option("--partition-file", opts.partition_file,
                  "termLexical<TAB>partition assignment file (hash fallback)");
  cmd->add_option("--sample-size", opts.sample_size, "reachability selectivity sample size");
  cmd->add_option("--seed", opts.seed, "sampling seed");
  cmd->add_option("--star-scope", opts.star_scope, "zero-length path scope: vd or vp")
      ->check(CLI::IsMember({"vd", "vp"}));
  cmd->add_option("--gamma", opts.gamma, "per-cell shipping cost weight");
  cmd->add_option("--transport", opts.transport, "transport: inproc or socket")
      ->check(CLI::IsMember({"inproc", "socket"}));
  cmd->add_flag("--lenient", opts.lenient, "skip malformed data lines instead of aborting");
  cmd->add_option("--store", opts.store, "store directory (env PATHJOIN_STORE)")
      ->envname("PATHJOIN_STORE");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StoreError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string query_text(const std::string& inline_text, const std::string& file) {
  if (!inline_text.empty()) return inline_text;
  if (!file.empty()) return read_file(file);
  throw QueryError("no query given: use --query or --query-file");
}

void print_result(const Engine& engine, const QueryResult& r, double seconds) {
  for (std::size_t i = 0; i < r.var_names.size(); ++i)
    std::cout << (i ? "\t" : "") << "?" << r.var_names[i];
  if (!r.var_names.empty()) std::cout << "\n";
  for (const auto& row : engine.decode_rows(r)) {
    for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "\t" : "") << row[i];
    std::cout << "\n";
  }
  std::cout << r.rows.size() << " result(s) in " << seconds << " s\n";
}

int cmd_load(const CommonOpts& opts, const std::string& data) {
  if (opts.store.empty()) throw StoreError("load requires --store");
  auto engine = Engine::load_file(data, opts.to_config());
  engine.save(opts.store);
  const auto& s = engine.summary();
  std::cout << "parsed triples:   " << s.parsed_triples << "\n";
  std::cout << "distinct triples: " << s.distinct_triples << "\n";
  std::cout << "terms:            " << s.terms << "\n";
  std::cout << "properties:       " << s.properties << "\n";
  for (std::size_t i = 0; i < s.partition_rows.size(); ++i)
    std::cout << "partition " << i << ": " << s.partition_rows[i] << " index rows, "
              << s.boundary_vertices[i] << " boundary vertices\n";
  if (!s.issues.empty()) std::cout << s.issues.size() << " malformed line(s) skipped\n";
  std::cout << "store written to " << opts.store << "\n";
  return 0;
}

int cmd_query(const CommonOpts& opts, const std::string& inline_text, const std::string& file,
              bool audit, bool explain_only) {
  if (opts.store.empty()) throw StoreError("query requires --store");
  auto engine = Engine::open(opts.store);
  auto text = query_text(inline_text, file);
  if (explain_only) {
    std::cout << engine.explain_query(text);
    return 0;
  }
  auto plan = engine.plan_query(text);
  auto start = std::chrono::steady_clock::now();
  auto result = engine.run(plan);
  auto stop = std::chrono::steady_clock::now();
  print_result(engine, result, std::chrono::duration<double>(stop - start).count());
  if (audit) std::cout << render_audit(result.audit);
  return 0;
}

int cmd_explain(const CommonOpts& opts, const std::string& inline_text, const std::string& file,
                bool dot, bool graph_dot) {
  if (opts.store.empty()) throw StoreError("explain requires --store");
  auto engine = Engine::open(opts.store);
  auto text = query_text(inline_text, file);
  if (graph_dot) {
    std::cout << engine.query_graph_dot(text);
    return 0;
  }
  if (dot) {
    std::cout << to_dot(engine.plan_query(text));
    return 0;
  }
  std::cout << engine.explain_query(text);
  return 0;
}

int cmd_stats(const CommonOpts& opts) {
  if (opts.store.empty()) throw StoreError("stats requires --store");
  auto engine = Engine::open(opts.store);
  save_stats(std::cout, engine.stats());
  return 0;
}

int cmd_oracle_check(const CommonOpts& opts, const std::string& inline_text,
                     const std::string& file, const std::string& data) {
  auto text = query_text(inline_text, file);
  Engine engine = data.empty() ? Engine::open(opts.store)
                               : Engine::load_file(data, opts.to_config());
  auto got = engine.query(text);
  auto expect = engine.oracle_result(text);
  std::set<std::vector<TermId>> got_rows(got.rows.begin(), got.rows.end());
  if (got_rows == expect.rows) {
    std::cout << "OK: engine and reference evaluator agree (" << expect.rows.size()
              << " rows)\n";
    return 0;
  }
  std::cout << "MISMATCH: engine " << got_rows.size() << " rows, reference "
            << expect.rows.size() << " rows\n";
  for (const auto& row : expect.rows) {
    if (!got_rows.count(row)) {
      std::cout << "missing:";
      for (TermId id : row) std::cout << " " << to_string(engine.dict().decode(id));
      std::cout << "\n";
    }
  }
  for (const auto& row : got_rows) {
    if (!expect.rows.count(row)) {
      std::cout << "extra:";
      for (TermId id : row) std::cout << " " << to_string(engine.dict().decode(id));
      std::cout << "\n";
    }
  }
  return 1;
}

int cmd_bench(const CommonOpts& opts, const std::string& data,
              const std::vector<std::string>& query_files, const std::string& k_list_text,
              const std::string& weak_text, int runs, const std::string& csv_path) {
  std::ifstream in(data);
  if (!in) throw StoreError("cannot open data file: " + data);
  Dictionary dict;
  auto triples = parse_ntriples_all(in, dict, !opts.lenient);

  std::vector<BenchQuery> queries;
  for (const auto& qf : query_files) {
    auto stem = std::filesystem::path(qf).stem().string();
    queries.push_back({stem, read_file(qf)});
  }
  if (queries.empty()) throw QueryError("bench requires at least one --query-file");

  BenchReport report;
  if (weak_text.empty()) {
    std::vector<int> ks;
    std::stringstream ss(k_list_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) ks.push_back(std::stoi(tok));
    if (ks.empty()) ks = {1, 2, 4};
    report = bench_strong_scaling(dict, triples, queries, ks, runs, opts.to_config());
  } else {
    std::vector<std::pair<double, int>> scale_k;
    std::stringstream ss(weak_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw QueryError("weak scaling spec must be scale:k pairs, e.g. 0.2:1,0.6:3,1.0:5");
      scale_k.emplace_back(std::stod(tok.substr(0, colon)), std::stoi(tok.substr(colon + 1)));
    }
    report = bench_weak_scaling(dict, triples, queries, scale_k, runs, opts.to_config());
  }
  std::cout << report.to_text();
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << report.to_csv();
    std::cout << "csv written to " << csv_path << "\n";
  }
  return 0;
}

int cmd_gen(std::uint64_t seed, int vertices, int properties, double edge_factor,
            const std::string& shape, const std::string& out_prefix, int query_seed_offset) {
  GenOptions opt;
  opt.seed = seed;
  opt.vertices = vertices;
  opt.properties = properties;
  opt.edge_factor = edge_factor;
  opt.shape = shape == "chain"       ? GenOptions::Shape::Chain
              : shape == "hierarchy" ? GenOptions::Shape::Hierarchy
                                     : GenOptions::Shape::Random;
  auto inst = generate_dataset(opt);
  {
    std::ofstream out(out_prefix + ".nt");
    out << to_ntriples(inst);
  }
  std::mt19937_64 qrng(seed + static_cast<std::uint64_t>(query_seed_offset));
  std::string query;
  while (true) {
    query = generate_query(qrng, inst);
    try {
      auto q = parse_query(query);
      rewrite_paths(q);
      build_query_graph(q);
      break;
    } catch (const QueryError&) {
      continue;  // reroll disconnected shapes
    }
  }
  {
    std::ofstream out(out_prefix + ".rq");
    out << query << "\n";
  }
  {
    auto q = parse_query(query);
    rewrite_paths(q);
    auto expect = oracle_evaluate(inst.triples, inst.dict, q);
    std::ofstream out(out_prefix + ".answers");
    for (std::size_t i = 0; i < expect.schema.size(); ++i)
      out << (i ? "\t" : "") << "?" << expect.schema[i];
    out << "\n";
    for (const auto& row : expect.rows) {
      for (std::size_t i = 0; i < row.size(); ++i)
        out << (i ? "\t" : "") << to_string(inst.dict.decode(row[i]));
      out << "\n";
    }
  }
  std::cout << "wrote " << out_prefix << ".nt (" << inst.triples.size() << " triples), "
            << out_prefix << ".rq, " << out_prefix << ".answers\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed in-memory engine for SPARQL triple patterns with property paths"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* load = app.add_subcommand("load", "parse, shard, index a dataset and persist the store");
  std::string data_file;
  load->add_option("data", data_file, "N-Triples file")->required();
  add_common(load, opts);

  auto* query = app.add_subcommand("query", "run a query against a loaded store");
  std::string inline_query, query_file;
  bool audit = false, explain_only = false;
  query->add_option("--query", inline_query, "query text");
  query->add_option("--query-file", query_file, "query file");
  query->add_flag("--audit", audit, "print the message audit after the result");
  query->add_flag("--explain-only", explain_only, "print the plan without executing");
  add_common(query, opts);

  auto* explain_cmd = app.add_subcommand("explain", "print the physical plan for a query");
  bool plan_dot = false, graph_dot = false;
  explain_cmd->add_option("--query", inline_query, "query text");
  explain_cmd->add_option("--query-file", query_file, "query file");
  explain_cmd->add_flag("--dot", plan_dot, "emit the plan as DOT");
  explain_cmd->add_flag("--graph-dot", graph_dot, "emit the query graph as DOT");
  add_common(explain_cmd, opts);

  auto* stats_cmd = app.add_subcommand("stats", "dump the statistics catalog of a store");
  add_common(stats_cmd, opts);

  auto* oracle_cmd =
      app.add_subcommand("oracle-check", "diff engine results against the reference evaluator");
  std::string oracle_data;
  oracle_cmd->add_option("--query", inline_query, "query text");
  oracle_cmd->add_option("--query-file", query_file, "query file");
  oracle_cmd->add_option("--data", oracle_data, "N-Triples file (loads fresh instead of --store)");
  add_common(oracle_cmd, opts);

  auto* bench_cmd = app.add_subcommand("bench", "strong/weak scaling benchmark");
  std::vector<std::string> bench_queries;
  std::string k_list = "1,2,4", weak_spec, csv_path;
  int runs = 3;
  bench_cmd->add_option("--data", data_file, "N-Triples file")->required();
  bench_cmd->add_option("--query-file", bench_queries, "query file (repeatable)");
  bench_cmd->add_option("--k-list", k_list, "comma-separated worker counts (strong scaling)");
  bench_cmd->add_option("--weak", weak_spec, "scale:k pairs, e.g. 0.2:1,0.6:3,1.0:5");
  bench_cmd->add_option("--runs", runs, "runs per query");
  bench_cmd->add_option("--csv", csv_path, "write CSV to this path");
  add_common(bench_cmd, opts);

  auto* gen_cmd = app.add_subcommand("gen", "generate a dataset, query and reference answers");
  std::uint64_t gen_seed = 1;
  int gen_vertices = 200, gen_properties = 4, gen_qseed = 0;
  double gen_edge_factor = 2.0;
  std::string gen_shape = "random", gen_out = "instance";
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--vertices", gen_vertices, "vertex count");
  gen_cmd->add_option("--properties", gen_properties, "property count");
  gen_cmd->add_option("--edge-factor", gen_edge_factor, "edges per vertex");
  gen_cmd->add_option("--shape", gen_shape, "random | chain | hierarchy")
      ->check(CLI::IsMember({"random", "chain", "hierarchy"}));
  gen_cmd->add_option("--out", gen_out, "output path prefix");
  gen_cmd->add_option("--query-seed", gen_qseed, "offset for the query generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (load->parsed()) return cmd_load(opts, data_file);
    if (query->parsed()) return cmd_query(opts, inline_query, query_file, audit, explain_only);
    if (explain_cmd->parsed())
      return cmd_explain(opts, inline_query, query_file, plan_dot, graph_dot);
    if (stats_cmd->parsed()) return cmd_stats(opts);
    if (oracle_cmd->parsed()) return cmd_oracle_check(opts, inline_query, query_file, oracle_data);
    if (bench_cmd->parsed())
      return cmd_bench(opts, data_file, bench_queries, k_list, weak_spec, runs, csv_path);
    if (gen_cmd->parsed())
      return cmd_gen(gen_seed, gen_vertices, gen_properties, gen_edge_factor, gen_shape, gen_out,
                     gen_qseed);
  } catch (const EngineError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
