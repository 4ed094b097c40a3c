#pragma once

#include <algorithm>
#include <array>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pathjoin/errors.hpp"
#include "pathjoin/partition.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

enum class Permutation : std::uint8_t { SPO = 0, SOP, PSO, OSP, OPS, POS };

enum class ShardGroup : std::uint8_t { SubjectKey = 0, ObjectKey = 1 };

inline const char* name_of(Permutation p) {
  static const char* names[] = {"SPO", "SOP", "PSO", "OSP", "OPS", "POS"};
  return names[static_cast<int>(p)];
}

// component_order[perm][i] = which triple field (0=s,1=p,2=o) sits at sort
// position i of the permutation.
inline const std::array<int, 3>& component_order(Permutation p) {
  static const std::array<std::array<int, 3>, 6> orders = {{
      {0, 1, 2},  // SPO
      {0, 2, 1},  // SOP
      {1, 0, 2},  // PSO
      {2, 0, 1},  // OSP
      {2, 1, 0},  // OPS
      {1, 2, 0},  // POS
  }};
  return orders[static_cast<int>(p)];
}

inline ShardGroup group_of(Permutation p) {
  return static_cast<int>(p) < 3 ? ShardGroup::SubjectKey : ShardGroup::ObjectKey;
}

using PermutedRow = std::array<TermId, 3>;

inline PermutedRow permute(const EncodedTriple& t, Permutation p) {
  const auto& ord = component_order(p);
  const TermId f[3] = {t.s, t.p, t.o};
  return {f[ord[0]], f[ord[1]], f[ord[2]]};
}

inline EncodedTriple unpermute(const PermutedRow& r, Permutation p) {
  const auto& ord = component_order(p);
  TermId f[3];
  f[ord[0]] = r[0];
  f[ord[1]] = r[1];
  f[ord[2]] = r[2];
  return {f[0], f[1], f[2]};
}

// Bound constants of a scan, expressed as a prefix of the permutation order.
struct ScanPattern {
  std::vector<TermId> prefix;
};

// One sorted triple ordering of a partition shard. Rows are stored already
// permuted (key components first), strictly sorted, duplicates removed, so a
// prefix lookup is a binary search followed by a sequential scan.
struct PermutationIndex {
  Permutation order = Permutation::SPO;
  ShardGroup group = ShardGroup::SubjectKey;
  std::vector<PermutedRow> rows;

  std::span<const PermutedRow> scan(const ScanPattern& key) const {
    if (key.prefix.empty()) return {rows.data(), rows.size()};
    if (key.prefix.size() > 3) throw StoreError("scan prefix longer than 3");
    auto lo = std::lower_bound(rows.begin(), rows.end(), key.prefix,
                               [](const PermutedRow& r, const std::vector<TermId>& k) {
                                 for (std::size_t i = 0; i < k.size(); ++i) {
                                   if (r[i] != k[i]) return r[i] < k[i];
                                 }
                                 return false;
                               });
    auto hi = std::upper_bound(lo, rows.end(), key.prefix,
                               [](const std::vector<TermId>& k, const PermutedRow& r) {
                                 for (std::size_t i = 0; i < k.size(); ++i) {
                                   if (r[i] != k[i]) return k[i] < r[i];
                                 }
                                 return false;
                               });
    return {rows.data() + (lo - rows.begin()), static_cast<std::size_t>(hi - lo)};
  }
};

// The six sorted permutations of one partition: three subject-key orderings
// over the subject-owned shard and three object-key orderings over the
// object-owned shard.
struct PartitionIndexes {
  int partition = 0;
  std::array<PermutationIndex, 6> perms;  // indexed by Permutation

  const PermutationIndex& index(Permutation p) const { return perms[static_cast<int>(p)]; }

  static PartitionIndexes build(std::span<const ShardedTriple> shard, int partition) {
    PartitionIndexes out;
    out.partition = partition;
    std::vector<EncodedTriple> subject_owned;
    std::vector<EncodedTriple> object_owned;
    for (const auto& st : shard) {
      if (st.subject_owner == partition) subject_owned.push_back(st.triple);
      if (st.object_owner == partition) object_owned.push_back(st.triple);
    }
    for (int i = 0; i < 6; ++i) {
      auto perm = static_cast<Permutation>(i);
      auto& idx = out.perms[i];
      idx.order = perm;
      idx.group = group_of(perm);
      const auto& src = idx.group == ShardGroup::SubjectKey ? subject_owned : object_owned;
      idx.rows.reserve(src.size());
      for (const auto& t : src) idx.rows.push_back(permute(t, perm));
      std::sort(idx.rows.begin(), idx.rows.end());
      idx.rows.erase(std::unique(idx.rows.begin(), idx.rows.end()), idx.rows.end());
    }
    return out;
  }
};

// Fixed tie-break preference over the six permutations.
inline constexpr std::array<Permutation, 6> kPermutationPreference = {
    Permutation::SPO, Permutation::SOP, Permutation::PSO,
    Permutation::OSP, Permutation::OPS, Permutation::POS};

// Positions (0=s,1=p,2=o) that are constant in a triple pattern.
struct PatternConstants {
  bool s = false, p = false, o = false;
  bool at(int pos) const { return pos == 0 ? s : pos == 1 ? p : o; }
  int count() const { return int(s) + int(p) + int(o); }
};

// Longest prefix of `perm` consisting solely of constant positions.
inline int prefix_match_length(Permutation perm, const PatternConstants& c) {
  const auto& ord = component_order(perm);
  int n = 0;
  while (n < 3 && c.at(ord[n])) ++n;
  return n;
}

// Picks the permutation whose order puts all constant positions first, in
// the fixed preference order.
inline Permutation select_permutation(const PatternConstants& c) {
  for (Permutation p : kPermutationPreference) {
    if (prefix_match_length(p, c) >= c.count()) return p;
  }
  return Permutation::SPO;  // unreachable: some permutation always matches
}

// Best permutation within one sharding group: longest achievable constant
// prefix wins, preference order breaks ties. Residual constants are filtered
// after the prefix scan.
inline Permutation select_permutation_in_group(const PatternConstants& c, ShardGroup g) {
  Permutation best = g == ShardGroup::SubjectKey ? Permutation::SPO : Permutation::OSP;
  int best_len = -1;
  for (Permutation p : kPermutationPreference) {
    if (group_of(p) != g) continue;
    int len = prefix_match_length(p, c);
    if (len > best_len) {
      best = p;
      best_len = len;
    }
  }
  return best;
}

// ---- binary snapshot ----
// Little-endian, fixed-width ids. Header: magic "PJIX", u32 version, u32
// partition, then per permutation: u8 perm, u64 row count, rows.

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw StoreError("snapshot truncated");
  return v;
}

}  // namespace detail

inline void save_indexes(std::ostream& out, const PartitionIndexes& idx) {
  out.write("PJIX", 4);
  detail::write_pod<std::uint32_t>(out, 1);
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(idx.partition));
  for (int i = 0; i < 6; ++i) {
    detail::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(i));
    const auto& rows = idx.perms[i].rows;
    detail::write_pod<std::uint64_t>(out, rows.size());
    if (!rows.empty())
      out.write(reinterpret_cast<const char*>(rows.data()), rows.size() * sizeof(PermutedRow));
  }
}

inline PartitionIndexes load_indexes(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PJIX", 4) != 0) throw StoreError("bad index snapshot magic");
  auto version = detail::read_pod<std::uint32_t>(in);
  if (version != 1) throw StoreError("unsupported index snapshot version");
  PartitionIndexes idx;
  idx.partition = static_cast<int>(detail::read_pod<std::uint32_t>(in));
  for (int i = 0; i < 6; ++i) {
    auto perm = detail::read_pod<std::uint8_t>(in);
    if (perm != i) throw StoreError("index snapshot permutation order corrupt");
    auto n = detail::read_pod<std::uint64_t>(in);
    idx.perms[i].order = static_cast<Permutation>(i);
    idx.perms[i].group = group_of(idx.perms[i].order);
    idx.perms[i].rows.resize(n);
    if (n) {
      in.read(reinterpret_cast<char*>(idx.perms[i].rows.data()), n * sizeof(PermutedRow));
      if (!in) throw StoreError("index snapshot truncated");
    }
  }
  return idx;
}

}  // namespace pathjoin
