#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>

namespace pathjoin {

using TermId = std::uint32_t;

// Sentinel for query constants that do not occur in the loaded data. Never
// issued by the dictionary, owned by partition (kInvalidTerm % k).
inline constexpr TermId kInvalidTerm = 0xffffffffu;

enum class TermKind : std::uint8_t { Iri, Literal };

// An RDF term. IRIs are stored without angle brackets; literals keep their
// full surface form verbatim (quotes, language tag, datatype suffix), which
// also serves as their identity.
struct Term {
  TermKind kind = TermKind::Iri;
  std::string lexical;

  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;
};

inline Term iri(std::string lexical) { return Term{TermKind::Iri, std::move(lexical)}; }
inline Term literal(std::string lexical) { return Term{TermKind::Literal, std::move(lexical)}; }

struct TermHash {
  std::size_t operator()(const Term& t) const {
    return std::hash<std::string>{}(t.lexical) * 2 + static_cast<std::size_t>(t.kind);
  }
};

// Serialized surface form (angle brackets for IRIs, literals verbatim).
inline std::string to_string(const Term& t) {
  if (t.kind == TermKind::Iri) return "<" + t.lexical + ">";
  return t.lexical;
}

struct EncodedTriple {
  TermId s = 0;
  TermId p = 0;
  TermId o = 0;

  friend bool operator==(const EncodedTriple&, const EncodedTriple&) = default;
  friend auto operator<=>(const EncodedTriple&, const EncodedTriple&) = default;
};

// Exact global counts describing the loaded data graph: |V_D| plus, per
// property p, the vertex and edge counts of the p-induced subgraph.
struct DataGraphMeta {
  std::uint64_t vertex_count = 0;
  std::set<TermId> properties;
  std::map<TermId, std::uint64_t> property_vertex_count;
  std::map<TermId, std::uint64_t> property_edge_count;

  std::uint64_t vertices_of(TermId p) const {
    auto it = property_vertex_count.find(p);
    return it == property_vertex_count.end() ? 0 : it->second;
  }
  std::uint64_t edges_of(TermId p) const {
    auto it = property_edge_count.find(p);
    return it == property_edge_count.end() ? 0 : it->second;
  }
};

}  // namespace pathjoin
