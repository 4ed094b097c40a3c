#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pathjoin/optimizer.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

// Sharded intermediate result: ordered variable schema plus row-major
// TermId tuples. When shard_key is set, every local tuple's key value is
// owned by the hosting partition.
struct Relation {
  std::vector<VarId> schema;
  std::vector<TermId> rows;  // row-major; width == schema.size()
  std::size_t count = 0;     // tracked explicitly: nullary schemas are legal
  VarId shard_key = kNoVar;

  std::size_t width() const { return schema.size(); }

  int col_of(VarId v) const {
    for (std::size_t i = 0; i < schema.size(); ++i)
      if (schema[i] == v) return static_cast<int>(i);
    return -1;
  }

  std::span<const TermId> row(std::size_t r) const {
    return {rows.data() + r * width(), width()};
  }

  void add_row(std::span<const TermId> vals) {
    rows.insert(rows.end(), vals.begin(), vals.end());
    ++count;
  }

  void add_empty_row() { ++count; }
};

}  // namespace pathjoin
