#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "pathjoin/dictionary.hpp"
#include "pathjoin/ntriples.hpp"
#include "pathjoin/partition.hpp"

using namespace pathjoin;

TEST_CASE("dictionary assigns dense first-seen ids idempotently") {
  Dictionary d;
  CHECK(d.encode(iri("ex:a")) == 0);
  CHECK(d.encode(iri("ex:a")) == 0);
  CHECK(d.encode(iri("ex:b")) == 1);
  CHECK(d.encode(iri("ex:a")) == 0);
  CHECK(d.encode(iri("ex:c")) == 2);
  CHECK(d.size() == 3);
}

TEST_CASE("dictionary distinguishes kinds and rejects unknown ids") {
  Dictionary d;
  TermId a = d.encode(iri("x"));
  TermId b = d.encode(literal("x"));
  CHECK(a != b);
  CHECK(d.decode(a) == iri("x"));
  CHECK_THROWS_AS(d.decode(static_cast<TermId>(d.size())), StoreError);
}

TEST_CASE("dictionary round-trips random terms") {
  std::mt19937_64 rng(7);
  Dictionary d;
  std::vector<Term> terms;
  for (int i = 0; i < 1000; ++i) {
    std::string lex;
    int len = 1 + static_cast<int>(rng() % 12);
    for (int j = 0; j < len; ++j) lex += static_cast<char>('a' + rng() % 26);
    terms.push_back(rng() % 2 ? iri(lex) : literal("\"" + lex + "\""));
  }
  for (const Term& t : terms) {
    TermId id = d.encode(t);
    CHECK(d.decode(id) == t);
    CHECK(d.encode(d.decode(id)) == id);
  }
}

TEST_CASE("dictionary text persistence reproduces the mapping") {
  Dictionary d;
  d.encode(iri("ex:s"));
  d.encode(literal("\"lit\"@en"));
  d.encode(iri("ex:p"));
  std::stringstream buf;
  d.save(buf);
  Dictionary d2 = Dictionary::load(buf);
  REQUIRE(d2.size() == d.size());
  for (TermId i = 0; i < d.size(); ++i) CHECK(d2.decode(i) == d.decode(i));
}

TEST_CASE("ntriples parses the minimal well-formed line") {
  Dictionary d;
  std::istringstream in("<ex:a> <ex:p> <ex:b> .\n");
  auto triples = parse_ntriples_all(in, d);
  REQUIRE(triples.size() == 1);
  CHECK(d.decode(triples[0].s) == iri("ex:a"));
  CHECK(d.decode(triples[0].p) == iri("ex:p"));
  CHECK(d.decode(triples[0].o) == iri("ex:b"));
}

TEST_CASE("ntriples reports malformed lines with their line number") {
  Dictionary d;
  std::istringstream in("<ex:a> <ex:p> <ex:b> .\n<ex:a> <ex:p>\n");
  try {
    parse_ntriples_all(in, d);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("ntriples lenient mode records issues and continues") {
  Dictionary d;
  std::istringstream in("<a> <p> <b> .\nbroken line\n<a> <p> <c> .\n");
  std::vector<ParseIssue> issues;
  auto triples = parse_ntriples_all(in, d, /*strict=*/false, &issues);
  CHECK(triples.size() == 2);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].line == 2);
}

TEST_CASE("ntriples keeps duplicates and comments at parse time") {
  Dictionary d;
  std::istringstream in("# header\n<a> <p> <b> .\n<a> <p> <b> .\n<a> <p> <c> .\n");
  auto triples = parse_ntriples_all(in, d);
  CHECK(triples.size() == 3);
  std::set<EncodedTriple> distinct(triples.begin(), triples.end());
  CHECK(distinct.size() == 2);
}

TEST_CASE("ntriples literals keep tags verbatim and survive re-serialization") {
  Dictionary d;
  std::string text =
      "<s> <p> \"plain\" .\n"
      "<s> <p> \"tagged\"@en .\n"
      "<s> <p> \"5\"^^<http://www.w3.org/2001/XMLSchema#integer> .\n"
      "<s> <p> \"esc\\\"aped\" .\n";
  std::istringstream in(text);
  auto triples = parse_ntriples_all(in, d);
  REQUIRE(triples.size() == 4);
  // re-serialize and re-parse: every distinct term survives
  std::ostringstream out;
  for (const auto& t : triples)
    out << to_string(d.decode(t.s)) << " " << to_string(d.decode(t.p)) << " "
        << to_string(d.decode(t.o)) << " .\n";
  Dictionary d2;
  std::istringstream in2(out.str());
  auto triples2 = parse_ntriples_all(in2, d2);
  REQUIRE(triples2.size() == triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    CHECK(d2.decode(triples2[i].o) == d.decode(triples[i].o));
  }
}

TEST_CASE("ntriples parse is deterministic") {
  std::string text = "<a> <p> <b> .\n<b> <p> <c> .\n";
  Dictionary d1, d2;
  std::istringstream in1(text), in2(text);
  CHECK(parse_ntriples_all(in1, d1) == parse_ntriples_all(in2, d2));
}

TEST_CASE("hash sharding follows mod-k on both roles") {
  auto st = assign_hash({5, 2, 8}, 2);
  CHECK(st.subject_owner == 1);
  CHECK(st.object_owner == 0);

  auto same = assign_hash({4, 1, 4}, 2);
  CHECK(same.subject_owner == 0);
  CHECK(same.object_owner == 0);

  auto single = assign_hash({123, 45, 678}, 1);
  CHECK(single.subject_owner == 0);
  CHECK(single.object_owner == 0);
}

TEST_CASE("custom assignment reads owners from the map") {
  PartitionAssignment map(2);
  map.require_total_coverage();
  map.set_explicit(10, 0);
  map.set_explicit(11, 1);
  auto st = assign_custom({10, 99, 11}, map);
  CHECK(st.subject_owner == 0);
  CHECK(st.object_owner == 1);
  CHECK_THROWS_AS(assign_custom({10, 99, 12}, map), StoreError);
}

TEST_CASE("partition assignment covers every vertex exactly once") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int k = 1 + static_cast<int>(rng() % 5);
    PartitionAssignment map(k);
    for (TermId v = 0; v < 200; ++v) {
      if (rng() % 3 == 0) map.set_explicit(v, static_cast<int>(rng() % k));
    }
    std::vector<std::set<TermId>> parts(k);
    for (TermId v = 0; v < 200; ++v) {
      int o = map.owner_of(v);
      REQUIRE(o >= 0);
      REQUIRE(o < k);
      parts[o].insert(v);
    }
    std::size_t total = 0;
    for (const auto& s : parts) total += s.size();
    CHECK(total == 200);  // disjoint cover
  }
}

TEST_CASE("partition file parsing validates indexes and falls back to hash") {
  Dictionary d;
  TermId a = d.encode(iri("ex:a"));
  TermId b = d.encode(iri("ex:b"));
  TermId c = d.encode(iri("ex:c"));

  std::string path = "partition_test.tsv";
  {
    std::ofstream out(path);
    out << "ex:a\t0\nex:b\t1\n";
  }
  auto map = load_partition_file(path, 2, d);
  CHECK(map.explicit_size() == 2);
  CHECK(map.owner_of(a) == 0);
  CHECK(map.owner_of(b) == 1);
  CHECK(map.owner_of(c) == static_cast<int>(c % 2));  // documented fallback

  {
    std::ofstream out(path);
    out << "ex:a\t5\n";
  }
  CHECK_THROWS_AS(load_partition_file(path, 2, d), ParseError);
  std::remove(path.c_str());
}
