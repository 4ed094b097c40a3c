#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "pathjoin/stats.hpp"
#include "test_util.hpp"

using namespace pathjoin;

namespace {

StatsCatalog build_stats(const std::vector<EncodedTriple>& triples,
                         const PartitionAssignment& assign) {
  std::vector<StatsFragment> frags;
  for (int part = 0; part < assign.partitions(); ++part) {
    auto idx = PartitionIndexes::build(testutil::shard_for(triples, assign, part), part);
    frags.push_back(compute_cardinalities(idx));
  }
  return merge_fragments(frags, compute_meta(triples));
}

}  // namespace

TEST_CASE("cardinalities count the distinct triple set") {
  std::vector<EncodedTriple> triples = {{0, 9, 1}, {2, 9, 1}, {4, 9, 5}, {0, 8, 1}, {0, 9, 1}};
  PartitionAssignment assign(2);
  auto cat = build_stats(triples, assign);
  CHECK(cat.total_triples == 4);  // one duplicate collapsed
  CHECK(cat.card_property(9) == 3);
  CHECK(cat.card_property(8) == 1);
  CHECK(cat.card_subject(0) == 2);
  CHECK(cat.card_object(1) == 3);
  CHECK(cat.card_pair_ps(9, 0) == 1);
  CHECK(cat.card_pair_po(9, 1) == 2);
  CHECK(cat.card_pair_so(0, 1) == 2);
}

TEST_CASE("empty dataset produces an empty catalog") {
  std::vector<EncodedTriple> none;
  PartitionAssignment assign(2);
  auto cat = build_stats(none, assign);
  CHECK(cat.total_triples == 0);
  CHECK(cat.card_s.empty());
  CHECK(cat.join_sel.empty());
}

TEST_CASE("cardinalities equal a full group-by on random data") {
  std::mt19937_64 rng(61);
  auto triples = testutil::random_triples(rng, 40, 4, 10000);
  std::set<EncodedTriple> distinct(triples.begin(), triples.end());
  for (int k : {1, 3}) {
    PartitionAssignment assign(k);
    auto cat = build_stats(triples, assign);
    REQUIRE(cat.total_triples == distinct.size());
    std::map<TermId, std::uint64_t> s, p, o;
    std::map<std::pair<TermId, TermId>, std::uint64_t> ps;
    for (const auto& t : distinct) {
      ++s[t.s];
      ++p[t.p];
      ++o[t.o];
      ++ps[{t.p, t.s}];
    }
    for (const auto& [k2, n] : s) CHECK(cat.card_subject(k2) == n);
    for (const auto& [k2, n] : p) CHECK(cat.card_property(k2) == n);
    for (const auto& [k2, n] : o) CHECK(cat.card_object(k2) == n);
    for (const auto& [k2, n] : ps) CHECK(cat.card_pair_ps(k2.first, k2.second) == n);
  }
}

TEST_CASE("disjoint properties have zero join selectivity") {
  // p edges over ids 0..3, q edges over 10..13: no shared values
  std::vector<EncodedTriple> triples = {{0, 5, 1}, {2, 5, 3}, {10, 6, 11}, {12, 6, 13}};
  PartitionAssignment assign(2);
  auto cat = build_stats(triples, assign);
  for (int role = 0; role < 4; ++role)
    CHECK(cat.sel_join(5, 6, static_cast<JoinRole>(role)) == 0.0);
}

TEST_CASE("unique-subject self-join selectivity is 1/n") {
  std::vector<EncodedTriple> triples = {{0, 7, 100}, {1, 7, 100}, {2, 7, 100}, {3, 7, 100}};
  PartitionAssignment assign(2);
  auto cat = build_stats(triples, assign);
  CHECK(cat.sel_join(7, 7, JoinRole::SS) == Catch::Approx(1.0 / 4.0));
}

TEST_CASE("join selectivities equal the nested-loop count on random data") {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 5; ++trial) {
    auto triples = testutil::random_triples(rng, 25, 3, 1000);
    std::set<EncodedTriple> distinct(triples.begin(), triples.end());
    int k = 1 + static_cast<int>(rng() % 4);
    PartitionAssignment assign(k);
    auto cat = build_stats(triples, assign);

    for (TermId pi = 25; pi < 28; ++pi) {
      for (TermId pj = 25; pj < 28; ++pj) {
        for (int role = 0; role < 4; ++role) {
          bool ls = role == 0 || role == 1;
          bool rs = role == 0 || role == 2;
          std::uint64_t count = 0;
          for (const auto& a : distinct) {
            if (a.p != pi) continue;
            for (const auto& b : distinct) {
              if (b.p != pj) continue;
              TermId va = ls ? a.s : a.o;
              TermId vb = rs ? b.s : b.o;
              count += va == vb;
            }
          }
          double expect = static_cast<double>(count) /
                          (static_cast<double>(cat.card_property(pi)) *
                           static_cast<double>(cat.card_property(pj)));
          CHECK(cat.sel_join(pi, pj, static_cast<JoinRole>(role)) == Catch::Approx(expect));
        }
      }
    }
  }
}

TEST_CASE("a single spanning cycle reaches everything") {
  // one SCC over V^p: selectivity 1.0 in exhaustive mode
  std::vector<EncodedTriple> triples;
  for (TermId i = 0; i < 8; ++i) triples.push_back({i, 100, (i + 1) % 8});
  CHECK(sample_reach_selectivity(triples, 100, 10000, 1) == 1.0);
}

TEST_CASE("reach selectivity rejects unknown properties") {
  std::vector<EncodedTriple> triples = {{0, 1, 2}};
  CHECK_THROWS_AS(sample_reach_selectivity(triples, 99, 100, 1), StoreError);
}

TEST_CASE("exhaustive mode equals the BFS closure fraction") {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    auto triples = testutil::random_triples(rng, 20, 1, 30);
    TermId p = 20;
    auto closure = testutil::bfs_closure(triples, p);
    std::set<TermId> verts;
    for (const auto& t : triples) {
      verts.insert(t.s);
      verts.insert(t.o);
    }
    double expect = static_cast<double>(closure.size()) /
                    (static_cast<double>(verts.size()) * static_cast<double>(verts.size()));
    CHECK(sample_reach_selectivity(triples, p, 1000000, 5) == Catch::Approx(expect));
  }
}

TEST_CASE("sampled mode lands near the exact value") {
  std::mt19937_64 rng(64);
  int within = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    auto triples = testutil::random_triples(rng, 200, 1, 400);
    TermId p = 200;
    auto closure = testutil::bfs_closure(triples, p);
    std::set<TermId> verts;
    for (const auto& t : triples) {
      verts.insert(t.s);
      verts.insert(t.o);
    }
    double exact = static_cast<double>(closure.size()) /
                   (static_cast<double>(verts.size()) * static_cast<double>(verts.size()));
    double sampled = sample_reach_selectivity(triples, p, 10000, 1000 + trial);
    if (std::abs(sampled - exact) <= 0.05) ++within;
  }
  CHECK(within >= 95);
}

TEST_CASE("sampling is reproducible for a fixed seed") {
  std::mt19937_64 rng(65);
  auto triples = testutil::random_triples(rng, 300, 1, 600);
  double a = sample_reach_selectivity(triples, 300, 5000, 77);
  double b = sample_reach_selectivity(triples, 300, 5000, 77);
  CHECK(a == b);
}

TEST_CASE("stats text round-trip preserves every record") {
  std::mt19937_64 rng(66);
  auto triples = testutil::random_triples(rng, 30, 3, 300);
  PartitionAssignment assign(2);
  auto cat = build_stats(triples, assign);
  compute_reach_selectivities(cat, triples, 10000, 42);

  std::stringstream buf;
  save_stats(buf, cat);
  auto loaded = load_stats(buf);
  CHECK(loaded.total_triples == cat.total_triples);
  CHECK(loaded.card_s == cat.card_s);
  CHECK(loaded.card_ps == cat.card_ps);
  CHECK(loaded.join_sel == cat.join_sel);
  CHECK(loaded.reach_sel == cat.reach_sel);
  CHECK(loaded.meta.vertex_count == cat.meta.vertex_count);

  std::stringstream buf2;
  save_stats(buf2, loaded);
  std::stringstream buf3;
  save_stats(buf3, cat);
  CHECK(buf2.str() == buf3.str());
}

TEST_CASE("per-partition sums are partition-count invariant") {
  std::mt19937_64 rng(67);
  auto triples = testutil::random_triples(rng, 50, 4, 2000);
  auto c1 = build_stats(triples, PartitionAssignment(1));
  auto c4 = build_stats(triples, PartitionAssignment(4));
  CHECK(c1.card_s == c4.card_s);
  CHECK(c1.card_p == c4.card_p);
  CHECK(c1.card_po == c4.card_po);
  CHECK(c1.join_sel == c4.join_sel);
}
