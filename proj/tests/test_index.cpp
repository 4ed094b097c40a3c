#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "pathjoin/triple_index.hpp"
#include "test_util.hpp"

using namespace pathjoin;

TEST_CASE("build keeps cardinality and dedups per permutation") {
  std::vector<ShardedTriple> shard = {
      {{0, 10, 2}, 0, 0},
      {{4, 10, 2}, 0, 0},
      {{0, 11, 4}, 0, 0},
      {{0, 11, 4}, 0, 0},  // duplicate
  };
  auto idx = PartitionIndexes::build(shard, 0);
  for (int i = 0; i < 6; ++i) CHECK(idx.perms[i].rows.size() == 3);
}

TEST_CASE("subject and object groups split by owner") {
  std::vector<ShardedTriple> shard = {
      {{1, 10, 2}, 1, 0},  // only object-owned here
      {{3, 10, 4}, 1, 0},  // object-owned
      {{2, 10, 5}, 0, 1},  // subject-owned
  };
  auto idx = PartitionIndexes::build(shard, 0);
  CHECK(idx.index(Permutation::SPO).rows.size() == 1);
  CHECK(idx.index(Permutation::OPS).rows.size() == 2);
}

TEST_CASE("rows are sorted by permutation order (sort oracle)") {
  std::mt19937_64 rng(42);
  auto triples = testutil::random_triples(rng, 50, 4, 10000);
  std::vector<ShardedTriple> shard;
  for (const auto& t : triples) shard.push_back({t, 0, 0});
  auto idx = PartitionIndexes::build(shard, 0);

  for (int i = 0; i < 6; ++i) {
    auto perm = static_cast<Permutation>(i);
    // independent comparison sort over raw triples
    std::vector<PermutedRow> expect;
    for (const auto& t : triples) expect.push_back(permute(t, perm));
    std::sort(expect.begin(), expect.end());
    expect.erase(std::unique(expect.begin(), expect.end()), expect.end());
    CHECK(idx.perms[i].rows == expect);
  }
}

TEST_CASE("permutation selection places constants first with fixed tie-break") {
  CHECK(select_permutation({true, true, false}) == Permutation::SPO);
  CHECK(select_permutation({false, true, false}) == Permutation::PSO);
  CHECK(select_permutation({false, false, false}) == Permutation::SPO);
  CHECK(select_permutation({true, false, false}) == Permutation::SPO);
  CHECK(select_permutation({false, false, true}) == Permutation::OSP);
  CHECK(select_permutation({false, true, true}) == Permutation::OPS);
  CHECK(select_permutation({true, false, true}) == Permutation::SOP);
  CHECK(select_permutation({true, true, true}) == Permutation::SPO);
}

TEST_CASE("in-group selection maximizes the constant prefix") {
  CHECK(select_permutation_in_group({false, true, false}, ShardGroup::SubjectKey) ==
        Permutation::PSO);
  CHECK(select_permutation_in_group({false, true, false}, ShardGroup::ObjectKey) ==
        Permutation::POS);
  // object constant has no subject-group prefix: falls back to preference
  CHECK(select_permutation_in_group({false, false, true}, ShardGroup::SubjectKey) ==
        Permutation::SPO);
  CHECK(select_permutation_in_group({false, true, true}, ShardGroup::SubjectKey) ==
        Permutation::PSO);
}

TEST_CASE("prefix scan equals a linear filter (oracle)") {
  std::mt19937_64 rng(1234);
  auto triples = testutil::random_triples(rng, 30, 3, 2000);
  std::vector<ShardedTriple> shard;
  for (const auto& t : triples) shard.push_back({t, 0, 0});
  auto idx = PartitionIndexes::build(shard, 0);

  std::set<EncodedTriple> distinct(triples.begin(), triples.end());

  for (int trial = 0; trial < 1000; ++trial) {
    auto perm = static_cast<Permutation>(rng() % 6);
    int plen = static_cast<int>(rng() % 4);
    EncodedTriple probe = triples[rng() % triples.size()];
    if (rng() % 4 == 0) probe = {static_cast<TermId>(rng() % 40), static_cast<TermId>(rng() % 40),
                                 static_cast<TermId>(rng() % 40)};
    auto key_row = permute(probe, perm);
    ScanPattern key;
    for (int i = 0; i < plen; ++i) key.prefix.push_back(key_row[i]);

    std::set<EncodedTriple> got;
    for (const auto& row : idx.index(perm).scan(key)) got.insert(unpermute(row, perm));

    std::set<EncodedTriple> expect;
    for (const auto& t : distinct) {
      auto r = permute(t, perm);
      bool ok = true;
      for (int i = 0; i < plen; ++i) ok &= r[i] == key.prefix[i];
      if (ok) expect.insert(t);
    }
    REQUIRE(got == expect);
  }
}

TEST_CASE("scan of an absent key is empty") {
  std::vector<ShardedTriple> shard = {{{0, 1, 2}, 0, 0}};
  auto idx = PartitionIndexes::build(shard, 0);
  CHECK(idx.index(Permutation::OPS).scan({{7}}).empty());
}

TEST_CASE("scan output is non-decreasing under the permutation comparator") {
  std::mt19937_64 rng(5);
  auto triples = testutil::random_triples(rng, 20, 2, 500);
  std::vector<ShardedTriple> shard;
  for (const auto& t : triples) shard.push_back({t, 0, 0});
  auto idx = PartitionIndexes::build(shard, 0);
  for (int i = 0; i < 6; ++i) {
    auto rows = idx.perms[i].scan({});
    CHECK(std::is_sorted(rows.begin(), rows.end()));
  }
}

TEST_CASE("union of per-partition shards reproduces the distinct triple set") {
  std::mt19937_64 rng(77);
  auto triples = testutil::random_triples(rng, 40, 3, 800);
  for (int k : {1, 2, 4}) {
    PartitionAssignment assign(k);
    std::set<EncodedTriple> sub_union, obj_union;
    for (int part = 0; part < k; ++part) {
      auto shard = testutil::shard_for(triples, assign, part);
      auto idx = PartitionIndexes::build(shard, part);
      for (const auto& row : idx.index(Permutation::SPO).scan({}))
        sub_union.insert(unpermute(row, Permutation::SPO));
      for (const auto& row : idx.index(Permutation::OSP).scan({}))
        obj_union.insert(unpermute(row, Permutation::OSP));
    }
    std::set<EncodedTriple> expect(triples.begin(), triples.end());
    CHECK(sub_union == expect);
    CHECK(obj_union == expect);
  }
}

TEST_CASE("index snapshot round-trips byte-identically") {
  std::mt19937_64 rng(9);
  auto triples = testutil::random_triples(rng, 25, 3, 400);
  PartitionAssignment assign(2);
  auto shard = testutil::shard_for(triples, assign, 1);
  auto idx = PartitionIndexes::build(shard, 1);

  std::stringstream buf1;
  save_indexes(buf1, idx);
  std::string bytes = buf1.str();

  std::stringstream in(bytes);
  auto loaded = load_indexes(in);
  CHECK(loaded.partition == 1);
  for (int i = 0; i < 6; ++i) CHECK(loaded.perms[i].rows == idx.perms[i].rows);

  std::stringstream buf2;
  save_indexes(buf2, loaded);
  CHECK(buf2.str() == bytes);
}

TEST_CASE("snapshot loader rejects corrupt headers") {
  std::stringstream buf("XXXX garbage");
  CHECK_THROWS_AS(load_indexes(buf), StoreError);
}
