#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pathjoin/errors.hpp"
#include "pathjoin/rdf.hpp"

namespace pathjoin {

// Query text layer for the supported fragment: conjunctions of triple
// patterns whose property position is a path expression
//   path := atom ('/' atom)*      atom := '^'term | term('?'|'*'|'+')?
// UNION / FILTER / OPTIONAL / aggregation are rejected as unsupported.

enum class PathMod : std::uint8_t { None, Star, Plus, Opt };

// Zero-length path scope for `*` and `?`: a vertex self-reaches iff it lies
// in the property's vertex set (Vp) or anywhere in the data graph (Vd, the
// default). One definition shared by engine and reference evaluator.
enum class StarScope : std::uint8_t { Vp, Vd };

struct PathAtom {
  Term property;
  PathMod mod = PathMod::None;
  bool inverted = false;
};

struct PatternTerm {
  bool is_var = false;
  Term term;        // when constant
  std::string var;  // when variable (without '?')
};

inline PatternTerm pattern_var(std::string name) {
  PatternTerm t;
  t.is_var = true;
  t.var = std::move(name);
  return t;
}

inline PatternTerm pattern_const(Term term) {
  PatternTerm t;
  t.term = std::move(term);
  return t;
}

struct RawPattern {
  PatternTerm subject;
  std::vector<PathAtom> path;  // >= 1 atom
  PatternTerm object;
};

// Post-rewrite pattern: exactly one atom, inversion resolved.
struct FlatPattern {
  PatternTerm subject;
  PathAtom atom;
  PatternTerm object;
};

struct Query {
  bool select_all = true;
  std::vector<std::string> projection;  // explicit SELECT list (without '?')
  std::vector<RawPattern> raw;
  std::vector<FlatPattern> flat;  // filled by rewrite_paths
};

// Fresh variables introduced by path rewriting live in a reserved namespace.
inline constexpr std::string_view kFreshVarPrefix = "_pp";

inline bool is_fresh_var(std::string_view name) {
  return name.substr(0, kFreshVarPrefix.size()) == kFreshVarPrefix;
}

namespace qdetail {

struct Token {
  enum class Kind {
    Iri,      // text = expanded IRI
    Literal,  // text = raw literal form
    Var,      // text = variable name without '?'
    Word,     // bare word / keyword candidate
    Punct,    // single char in text
    End,
  };
  Kind kind = Kind::End;
  std::string text;
  std::size_t pos = 0;
  bool glued = false;  // no whitespace between this token and the previous
};

inline bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':';
}

inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline const std::vector<std::string>& unsupported_keywords() {
  static const std::vector<std::string> kw = {
      "FILTER",   "OPTIONAL", "UNION",  "GROUP",  "HAVING", "ORDER",
      "LIMIT",    "OFFSET",   "ASK",    "CONSTRUCT", "DESCRIBE", "MINUS",
      "VALUES",   "BIND",     "SERVICE", "EXISTS", "COUNT",  "DISTINCT"};
  return kw;
}

inline void reject_unsupported(const std::string& word) {
  const std::string u = upper(word);
  for (const auto& kw : unsupported_keywords()) {
    if (u == kw) throw QueryError("unsupported feature: " + kw);
  }
}

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      bool glued = !skip_space();
      if (i_ >= text_.size()) {
        out.push_back({Token::Kind::End, "", i_, glued});
        break;
      }
      std::size_t start = i_;
      char c = text_[i_];
      if (c == '<') {
        auto end = text_.find('>', i_ + 1);
        if (end == std::string_view::npos) throw QueryError(err(start, "unterminated IRI"));
        out.push_back({Token::Kind::Iri, std::string(text_.substr(i_ + 1, end - i_ - 1)), start,
                       glued});
        i_ = end + 1;
      } else if (c == '"') {
        ++i_;
        while (i_ < text_.size() && text_[i_] != '"') {
          if (text_[i_] == '\\') ++i_;
          ++i_;
        }
        if (i_ >= text_.size()) throw QueryError(err(start, "unterminated literal"));
        ++i_;
        if (i_ < text_.size() && text_[i_] == '@') {
          ++i_;
          while (i_ < text_.size() &&
                 (std::isalnum(static_cast<unsigned char>(text_[i_])) || text_[i_] == '-'))
            ++i_;
        } else if (i_ + 1 < text_.size() && text_[i_] == '^' && text_[i_ + 1] == '^') {
          i_ += 2;
          if (i_ >= text_.size() || text_[i_] != '<')
            throw QueryError(err(start, "malformed datatype suffix"));
          auto end = text_.find('>', i_ + 1);
          if (end == std::string_view::npos)
            throw QueryError(err(start, "unterminated datatype IRI"));
          i_ = end + 1;
        }
        out.push_back({Token::Kind::Literal, std::string(text_.substr(start, i_ - start)), start,
                       glued});
      } else if (c == '?' && i_ + 1 < text_.size() &&
                 (std::isalnum(static_cast<unsigned char>(text_[i_ + 1])) ||
                  text_[i_ + 1] == '_')) {
        ++i_;
        std::size_t vstart = i_;
        while (i_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[i_])) || text_[i_] == '_'))
          ++i_;
        out.push_back({Token::Kind::Var, std::string(text_.substr(vstart, i_ - vstart)), start,
                       glued});
      } else if (c == '@' || std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        if (c == '@') ++i_;
        while (i_ < text_.size()) {
          char n = text_[i_];
          if (name_char(n)) {
            ++i_;
          } else if ((n == '.' || n == ',') && i_ + 1 < text_.size() &&
                     (std::isalnum(static_cast<unsigned char>(text_[i_ + 1])) ||
                      text_[i_ + 1] == '_')) {
            i_ += 2;  // separator chars glued inside prefixed local names
          } else {
            break;
          }
        }
        std::string word(text_.substr(start, i_ - start));
        reject_unsupported(word);
        out.push_back({Token::Kind::Word, std::move(word), start, glued});
      } else if (c == '{' || c == '}' || c == '.' || c == '/' || c == '^' || c == '*' ||
                 c == '+' || c == '?') {
        ++i_;
        out.push_back({Token::Kind::Punct, std::string(1, c), start, glued});
      } else if (c == '#') {
        while (i_ < text_.size() && text_[i_] != '\n') ++i_;
      } else {
        throw QueryError(err(start, std::string("unexpected character '") + c + "'"));
      }
    }
    return out;
  }

 private:
  bool skip_space() {
    bool any = false;
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) {
      ++i_;
      any = true;
    }
    return any;
  }

  std::string err(std::size_t pos, const std::string& msg) {
    return "syntax error at offset " + std::to_string(pos) + ": " + msg;
  }

  std::string_view text_;
  std::size_t i_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(Tokenizer(text).run()) {}

  Query run() {
    Query q;
    parse_prologue();
    expect_keyword("SELECT");
    if (at_punct("*")) {
      ++i_;
      q.select_all = true;
    } else {
      q.select_all = false;
      while (cur().kind == Token::Kind::Var) {
        q.projection.push_back(cur().text);
        ++i_;
      }
      if (q.projection.empty()) fail("expected '*' or variable list after SELECT");
    }
    expect_keyword("WHERE");
    expect_punct("{");
    while (!at_punct("}")) {
      q.raw.push_back(parse_pattern());
      if (at_punct(".")) ++i_;
    }
    expect_punct("}");
    if (cur().kind != Token::Kind::End) fail("trailing input after '}'");
    return q;
  }

 private:
  const Token& cur() const { return tokens_[i_]; }
  const Token& peek() const { return tokens_[std::min(i_ + 1, tokens_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw QueryError("syntax error at offset " + std::to_string(cur().pos) + ": " + msg);
  }

  bool at_punct(std::string_view p) const {
    return cur().kind == Token::Kind::Punct && cur().text == p;
  }

  void expect_punct(std::string_view p) {
    if (!at_punct(p)) fail("expected '" + std::string(p) + "'");
    ++i_;
  }

  void expect_keyword(const std::string& kw) {
    if (cur().kind != Token::Kind::Word || upper(cur().text) != kw) fail("expected " + kw);
    ++i_;
  }

  void parse_prologue() {
    while (cur().kind == Token::Kind::Word &&
           (upper(cur().text) == "PREFIX" || cur().text == "@prefix")) {
      ++i_;
      if (cur().kind != Token::Kind::Word || cur().text.back() != ':')
        fail("expected prefix name ending in ':'");
      std::string name = cur().text.substr(0, cur().text.size() - 1);
      ++i_;
      if (cur().kind != Token::Kind::Iri) fail("expected IRI after prefix name");
      prefixes_[name] = cur().text;
      ++i_;
      if (at_punct(".")) ++i_;  // Turtle-style @prefix terminator
    }
  }

  Term expand(const std::string& word) const {
    auto colon = word.find(':');
    if (colon != std::string::npos) {
      auto pit = prefixes_.find(word.substr(0, colon));
      if (pit != prefixes_.end()) return iri(pit->second + word.substr(colon + 1));
    }
    return iri(word);  // bare word or unknown prefix: taken verbatim
  }

  PatternTerm parse_endpoint() {
    const Token& t = cur();
    switch (t.kind) {
      case Token::Kind::Var:
        ++i_;
        if (is_fresh_var(tokens_[i_ - 1].text))
          fail("variable names starting with '_pp' are reserved");
        return pattern_var(tokens_[i_ - 1].text);
      case Token::Kind::Iri:
        ++i_;
        return pattern_const(iri(tokens_[i_ - 1].text));
      case Token::Kind::Literal:
        ++i_;
        return pattern_const(literal(tokens_[i_ - 1].text));
      case Token::Kind::Word: {
        ++i_;
        return pattern_const(expand(tokens_[i_ - 1].text));
      }
      default:
        fail("expected term or variable");
    }
  }

  Term parse_path_term() {
    const Token& t = cur();
    if (t.kind == Token::Kind::Var) throw QueryError("variable predicates are not supported");
    if (t.kind == Token::Kind::Iri) {
      ++i_;
      return iri(tokens_[i_ - 1].text);
    }
    if (t.kind == Token::Kind::Word) {
      ++i_;
      return expand(tokens_[i_ - 1].text);
    }
    fail("expected property");
  }

  PathAtom parse_atom() {
    PathAtom atom;
    if (at_punct("^")) {
      ++i_;
      atom.inverted = true;
      atom.property = parse_path_term();
      return atom;  // grammar: inversion carries no modifier
    }
    atom.property = parse_path_term();
    if (cur().kind == Token::Kind::Punct && cur().glued &&
        (cur().text == "*" || cur().text == "+" || cur().text == "?")) {
      atom.mod = cur().text == "*"   ? PathMod::Star
                 : cur().text == "+" ? PathMod::Plus
                                     : PathMod::Opt;
      ++i_;
    }
    return atom;
  }

  RawPattern parse_pattern() {
    RawPattern p;
    p.subject = parse_endpoint();
    p.path.push_back(parse_atom());
    while (at_punct("/")) {
      ++i_;
      p.path.push_back(parse_atom());
    }
    p.object = parse_endpoint();
    return p;
  }

  std::vector<Token> tokens_;
  std::size_t i_ = 0;
  std::map<std::string, std::string> prefixes_;
};

}  // namespace qdetail

inline Query parse_query(std::string_view text) { return qdetail::Parser(text).run(); }

// Expands '/'-chains into fresh-variable joins and resolves '^' by swapping
// endpoints. Fresh variables are globally unique across the query and never
// projected.
inline void rewrite_paths(Query& q) {
  q.flat.clear();
  int fresh = 0;
  for (const auto& raw : q.raw) {
    std::vector<PatternTerm> points;
    points.push_back(raw.subject);
    for (std::size_t i = 0; i + 1 < raw.path.size(); ++i)
      points.push_back(pattern_var(std::string(kFreshVarPrefix) + std::to_string(fresh++)));
    points.push_back(raw.object);
    for (std::size_t i = 0; i < raw.path.size(); ++i) {
      FlatPattern fp;
      fp.atom = raw.path[i];
      if (fp.atom.inverted) {
        fp.subject = points[i + 1];
        fp.object = points[i];
        fp.atom.inverted = false;
      } else {
        fp.subject = points[i];
        fp.object = points[i + 1];
      }
      q.flat.push_back(fp);
    }
  }
}

// User variables in first-appearance order (fresh rewrite variables
// excluded); the default SELECT * projection.
inline std::vector<std::string> user_variables(const Query& q) {
  std::vector<std::string> out;
  auto add = [&](const PatternTerm& t) {
    if (!t.is_var || is_fresh_var(t.var)) return;
    if (std::find(out.begin(), out.end(), t.var) == out.end()) out.push_back(t.var);
  };
  for (const auto& p : q.raw) {
    add(p.subject);
    add(p.object);
  }
  return out;
}

inline std::string to_string(const PathAtom& a) {
  std::string s;
  if (a.inverted) s += "^";
  s += a.property.lexical;
  switch (a.mod) {
    case PathMod::None: break;
    case PathMod::Star: s += "*"; break;
    case PathMod::Plus: s += "+"; break;
    case PathMod::Opt: s += "?"; break;
  }
  return s;
}

inline std::string to_string(const PatternTerm& t) {
  if (t.is_var) return "?" + t.var;
  return to_string(t.term);
}

}  // namespace pathjoin
