#pragma once

#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "pathjoin/dictionary.hpp"
#include "pathjoin/errors.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

// Line-oriented N-Triples subset:
//   <s> <p> <o> .        or        <s> <p> "literal"(@lang|^^<dt>)? .
// '#' lines are comments. No blank nodes, no prefixed names at the data
// layer. Duplicate lines yield duplicate triples; dedup happens at index
// build.

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

namespace detail {

inline void skip_ws(std::string_view s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
}

inline Term read_term(std::string_view s, std::size_t& i, std::size_t lineno,
                      bool allow_literal) {
  if (i >= s.size()) throw ParseError(lineno, "unexpected end of line");
  if (s[i] == '<') {
    auto end = s.find('>', i + 1);
    if (end == std::string_view::npos) throw ParseError(lineno, "unterminated IRI");
    Term t = iri(std::string(s.substr(i + 1, end - i - 1)));
    if (t.lexical.empty()) throw ParseError(lineno, "empty IRI");
    i = end + 1;
    return t;
  }
  if (s[i] == '"') {
    if (!allow_literal) throw ParseError(lineno, "literal not allowed here");
    std::size_t start = i;
    ++i;
    while (i < s.size() && s[i] != '"') {
      if (s[i] == '\\') ++i;  // escaped char, keep verbatim
      ++i;
    }
    if (i >= s.size()) throw ParseError(lineno, "unterminated literal");
    ++i;  // closing quote
    // optional @lang or ^^<datatype>, kept as part of the lexical form
    if (i < s.size() && s[i] == '@') {
      while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    } else if (i + 1 < s.size() && s[i] == '^' && s[i + 1] == '^') {
      i += 2;
      if (i >= s.size() || s[i] != '<') throw ParseError(lineno, "malformed datatype suffix");
      auto end = s.find('>', i + 1);
      if (end == std::string_view::npos) throw ParseError(lineno, "unterminated datatype IRI");
      i = end + 1;
    }
    return literal(std::string(s.substr(start, i - start)));
  }
  throw ParseError(lineno, "expected '<' or '\"'");
}

}  // namespace detail

// Parses one line; returns false for blank/comment lines.
inline bool parse_ntriples_line(std::string_view line, std::size_t lineno,
                                Term& s, Term& p, Term& o) {
  std::size_t i = 0;
  detail::skip_ws(line, i);
  if (i >= line.size() || line[i] == '#') return false;
  s = detail::read_term(line, i, lineno, /*allow_literal=*/false);
  detail::skip_ws(line, i);
  p = detail::read_term(line, i, lineno, /*allow_literal=*/false);
  detail::skip_ws(line, i);
  o = detail::read_term(line, i, lineno, /*allow_literal=*/true);
  detail::skip_ws(line, i);
  if (i >= line.size() || line[i] != '.') throw ParseError(lineno, "expected terminating '.'");
  ++i;
  detail::skip_ws(line, i);
  if (i != line.size()) throw ParseError(lineno, "trailing garbage after '.'");
  return true;
}

// Streaming parse: invokes `sink` per triple, encoding terms through `dict`.
// strict=true aborts on the first malformed line; lenient mode records the
// issue and continues. Returns the number of triples emitted.
inline std::size_t parse_ntriples(std::istream& in, Dictionary& dict, bool strict,
                                  const std::function<void(const EncodedTriple&)>& sink,
                                  std::vector<ParseIssue>* issues = nullptr) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t count = 0;
  Term s, p, o;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      if (!parse_ntriples_line(line, lineno, s, p, o)) continue;
    } catch (const ParseError& e) {
      if (strict) throw;
      if (issues) issues->push_back({lineno, e.what()});
      continue;
    }
    sink({dict.encode(s), dict.encode(p), dict.encode(o)});
    ++count;
  }
  return count;
}

inline std::vector<EncodedTriple> parse_ntriples_all(std::istream& in, Dictionary& dict,
                                                     bool strict = true,
                                                     std::vector<ParseIssue>* issues = nullptr) {
  std::vector<EncodedTriple> out;
  parse_ntriples(in, dict, strict, [&](const EncodedTriple& t) { out.push_back(t); }, issues);
  return out;
}

}  // namespace pathjoin
