#pragma once

#include <fstream>
#include <string>
#include <unordered_map>

#include "pathjoin/dictionary.hpp"
#include "pathjoin/errors.hpp"
#include "pathjoin/ntriples.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

// Total vertex -> partition assignment over k partitions. The default is
// mod-k hashing over term ids; explicit entries (e.g. from an externally
// computed locality-preserving partitioning) override the hash. Owners
// depend only on (TermId, k, entries), so identical inputs reshard
// identically.
class PartitionAssignment {
 public:
  explicit PartitionAssignment(int k) : k_(k) {
    if (k < 1) throw StoreError("partition count must be >= 1");
  }

  int partitions() const { return k_; }
  bool has_explicit_entries() const { return !explicit_.empty(); }

  int owner_of(TermId v) const {
    if (!explicit_.empty()) {
      auto it = explicit_.find(v);
      if (it != explicit_.end()) return it->second;
      if (!hash_fallback_)
        throw StoreError("vertex id " + std::to_string(v) + " not covered by partition map");
    }
    return static_cast<int>(v % static_cast<TermId>(k_));
  }

  void set_explicit(TermId v, int partition) {
    if (partition < 0 || partition >= k_)
      throw StoreError("partition index " + std::to_string(partition) + " out of range for k=" +
                       std::to_string(k_));
    explicit_[v] = partition;
  }

  // Totality enforcement for programmatic maps (loadPartitionFile keeps the
  // documented hash fallback instead).
  void require_total_coverage() { hash_fallback_ = false; }

  std::size_t explicit_size() const { return explicit_.size(); }

 private:
  int k_;
  bool hash_fallback_ = true;
  std::unordered_map<TermId, int> explicit_;
};

struct ShardedTriple {
  EncodedTriple triple;
  int subject_owner = 0;
  int object_owner = 0;
};

inline ShardedTriple assign_hash(const EncodedTriple& t, int k) {
  if (k < 1) throw StoreError("partition count must be >= 1");
  return {t, static_cast<int>(t.s % static_cast<TermId>(k)),
          static_cast<int>(t.o % static_cast<TermId>(k))};
}

inline ShardedTriple assign_custom(const EncodedTriple& t, const PartitionAssignment& map) {
  return {t, map.owner_of(t.s), map.owner_of(t.o)};
}

// File format: `termLexical<TAB>partitionIndex` per line. The lexical is an
// IRI written bare or in angle brackets, or a literal in its quoted surface
// form. Terms absent from the dictionary are ignored (they cannot occur in
// the data). Listed vertices get explicit owners, everything else falls
// back to mod-k hashing.
inline PartitionAssignment load_partition_file(const std::string& path, int k,
                                               const Dictionary& dict) {
  std::ifstream in(path);
  if (!in) throw StoreError("cannot open partition file: " + path);
  PartitionAssignment assign(k);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(lineno, "partition file line lacks a tab separator");
    std::string lex = line.substr(0, tab);
    int part;
    try {
      part = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(lineno, "partition index is not an integer");
    }
    if (part < 0 || part >= k)
      throw ParseError(lineno, "partition index " + std::to_string(part) +
                                   " out of range for k=" + std::to_string(k));
    Term t;
    if (!lex.empty() && lex.front() == '"') {
      t = literal(lex);
    } else if (!lex.empty() && lex.front() == '<' && lex.back() == '>') {
      t = iri(lex.substr(1, lex.size() - 2));
    } else {
      t = iri(lex);
    }
    if (auto id = dict.lookup(t)) assign.set_explicit(*id, part);
  }
  return assign;
}

}  // namespace pathjoin
