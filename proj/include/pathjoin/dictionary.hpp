#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "pathjoin/errors.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

// Bijective Term <-> TermId mapping. Ids are dense and assigned in
// first-seen order. Built single-writer at the master during load, frozen
// and shared read-only afterwards.
class Dictionary {
 public:
  TermId encode(const Term& t) {
    auto it = ids_.find(t);
    if (it != ids_.end()) return it->second;
    TermId id = static_cast<TermId>(terms_.size());
    terms_.push_back(t);
    ids_.emplace(terms_.back(), id);
    return id;
  }

  const Term& decode(TermId id) const {
    if (id >= terms_.size())
      throw StoreError("unknown term id " + std::to_string(id));
    return terms_[id];
  }

  std::optional<TermId> lookup(const Term& t) const {
    auto it = ids_.find(t);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return terms_.size(); }

  // Text persistence: `id<TAB><kind-char><lexical>` per line, kind-char
  // 'I' or 'L'. Lexicals never contain newlines or tabs in the accepted
  // N-Triples subset.
  void save(std::ostream& out) const {
    for (std::size_t id = 0; id < terms_.size(); ++id) {
      const Term& t = terms_[id];
      out << id << '\t' << (t.kind == TermKind::Iri ? 'I' : 'L') << t.lexical
          << '\n';
    }
  }

  static Dictionary load(std::istream& in) {
    Dictionary d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos || tab + 2 > line.size())
        throw StoreError("dictionary line " + std::to_string(lineno) + " malformed");
      TermId id = static_cast<TermId>(std::stoul(line.substr(0, tab)));
      char kind = line[tab + 1];
      if (kind != 'I' && kind != 'L')
        throw StoreError("dictionary line " + std::to_string(lineno) + ": bad kind");
      Term t{kind == 'I' ? TermKind::Iri : TermKind::Literal, line.substr(tab + 2)};
      if (id != d.encode(t))
        throw StoreError("dictionary line " + std::to_string(lineno) + ": non-contiguous id");
    }
    return d;
  }

 private:
  std::vector<Term> terms_;
  std::unordered_map<Term, TermId, TermHash> ids_;
};

}  // namespace pathjoin
