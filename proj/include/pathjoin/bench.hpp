#pragma once

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "pathjoin/engine.hpp"

namespace pathjoin {

// Scaling benchmark harness: fixed data with a growing worker count
// (strong) or data size and workers grown in proportion (weak). Reports
// wall times, per-group geometric means, result cardinalities and message
// counts; correctness checks live in the acceptance suite, the report only
// flags cardinality mismatches across k.

struct BenchQuery {
  std::string name;
  std::string text;
};

struct BenchRow {
  std::string mode;  // "strong" or "weak"
  double scale = 1.0;
  int k = 1;
  std::string query;
  std::vector<double> wall_seconds;
  double median_seconds = 0;
  std::size_t results = 0;
  std::uint64_t messages = 0;
  int frontier_rounds = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  bool cardinalities_consistent = true;

  // geometric mean of the per-query medians within one (mode, scale, k)
  double geo_mean(const std::string& mode, double scale, int k) const {
    double log_sum = 0;
    int n = 0;
    for (const auto& r : rows) {
      if (r.mode != mode || r.scale != scale || r.k != k) continue;
      log_sum += std::log(std::max(r.median_seconds, 1e-9));
      ++n;
    }
    return n ? std::exp(log_sum / n) : 0.0;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << std::left << std::setw(8) << "mode" << std::setw(8) << "scale" << std::setw(4) << "k"
        << std::setw(14) << "query" << std::setw(12) << "median_s" << std::setw(10) << "results"
        << std::setw(10) << "messages" << "frontier_rounds\n";
    for (const auto& r : rows) {
      out << std::left << std::setw(8) << r.mode << std::setw(8) << r.scale << std::setw(4) << r.k
          << std::setw(14) << r.query << std::setw(12) << std::fixed << std::setprecision(4)
          << r.median_seconds << std::setw(10) << r.results << std::setw(10) << r.messages
          << r.frontier_rounds << "\n";
    }
    // per-group geometric means
    std::vector<std::tuple<std::string, double, int>> groups;
    for (const auto& r : rows) {
      auto g = std::make_tuple(r.mode, r.scale, r.k);
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    for (const auto& [mode, scale, k] : groups) {
      out << std::left << std::setw(8) << mode << std::setw(8) << scale << std::setw(4) << k
          << std::setw(14) << "geo_mean" << std::fixed << std::setprecision(4)
          << geo_mean(mode, scale, k) << "\n";
    }
    if (!cardinalities_consistent)
      out << "WARNING: result cardinalities differ across k for the same query\n";
    return out.str();
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "mode,scale,k,query,runs,median_s,min_s,max_s,results,messages,frontier_rounds\n";
    for (const auto& r : rows) {
      double mn = r.wall_seconds.empty() ? 0 : *std::min_element(r.wall_seconds.begin(),
                                                                 r.wall_seconds.end());
      double mx = r.wall_seconds.empty() ? 0 : *std::max_element(r.wall_seconds.begin(),
                                                                 r.wall_seconds.end());
      out << r.mode << "," << r.scale << "," << r.k << "," << r.query << ","
          << r.wall_seconds.size() << "," << r.median_seconds << "," << mn << "," << mx << ","
          << r.results << "," << r.messages << "," << r.frontier_rounds << "\n";
    }
    return out.str();
  }
};

namespace bdetail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

inline BenchRow run_one(Engine& engine, const BenchQuery& q, const std::string& mode,
                        double scale, int k, int runs) {
  BenchRow row;
  row.mode = mode;
  row.scale = scale;
  row.k = k;
  row.query = q.name;
  auto plan = engine.plan_query(q.text);
  for (int r = 0; r < runs; ++r) {
    auto start = std::chrono::steady_clock::now();
    auto result = engine.run(plan);
    auto stop = std::chrono::steady_clock::now();
    row.wall_seconds.push_back(std::chrono::duration<double>(stop - start).count());
    row.results = result.rows.size();
    row.messages = result.audit.messages;
    row.frontier_rounds = result.audit.total_frontier_rounds();
  }
  row.median_seconds = median_of(row.wall_seconds);
  return row;
}

}  // namespace bdetail

inline BenchReport bench_strong_scaling(const Dictionary& dict,
                                        const std::vector<EncodedTriple>& triples,
                                        const std::vector<BenchQuery>& queries,
                                        const std::vector<int>& k_list, int runs,
                                        EngineConfig base_cfg) {
  BenchReport report;
  std::map<std::string, std::size_t> cards;
  for (int k : k_list) {
    EngineConfig cfg = base_cfg;
    cfg.slaves = k;
    Dictionary d = dict;
    auto engine = Engine::from_triples(std::move(d), triples, cfg);
    for (const auto& q : queries) {
      auto row = bdetail::run_one(engine, q, "strong", 1.0, k, runs);
      auto it = cards.find(q.name);
      if (it == cards.end())
        cards[q.name] = row.results;
      else if (it->second != row.results)
        report.cardinalities_consistent = false;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// Weak scaling: dataset prefix fractions paired with worker counts.
inline BenchReport bench_weak_scaling(const Dictionary& dict,
                                      const std::vector<EncodedTriple>& triples,
                                      const std::vector<BenchQuery>& queries,
                                      const std::vector<std::pair<double, int>>& scale_k,
                                      int runs, EngineConfig base_cfg) {
  BenchReport report;
  for (const auto& [scale, k] : scale_k) {
    EngineConfig cfg = base_cfg;
    cfg.slaves = k;
    std::vector<EncodedTriple> prefix(
        triples.begin(),
        triples.begin() + static_cast<long>(static_cast<double>(triples.size()) * scale));
    Dictionary d = dict;
    auto engine = Engine::from_triples(std::move(d), std::move(prefix), cfg);
    for (const auto& q : queries)
      report.rows.push_back(bdetail::run_one(engine, q, "weak", scale, k, runs));
  }
  return report;
}

}  // namespace pathjoin
