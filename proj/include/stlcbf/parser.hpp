#pragma once

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>

#include "stlcbf/formula.hpp"
#include "stlcbf/predicate.hpp"

namespace stlcbf {

// Concrete grammar:
//   phi   := until ( '&' until )*
//   until := unary ( 'U' interval unary )*          (left associative)
//   unary := 'T' | ident | '!' ident | 'G' interval unary
//          | 'F' interval unary | '(' phi ')'
//   interval := '[' number ',' number ']'
// A bare `G`, `F` or `U` word followed by '[' is an operator; `T` is always
// the constant true.

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const PredicateTable* preds) : s_(text), preds_(preds) {}

  Formula parse() {
    Formula f = parse_and();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, at);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  static bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  // Reads an identifier without consuming it.
  std::string_view peek_word() {
    skip_ws();
    std::size_t e = pos_;
    if (e < s_.size() && ident_start(s_[e])) {
      while (e < s_.size() && ident_char(s_[e])) ++e;
    }
    return s_.substr(pos_, e - pos_);
  }

  // True when the upcoming word is `op` directly followed (modulo spaces) by '['.
  bool at_operator(std::string_view op) {
    const auto w = peek_word();
    if (w != op) return false;
    std::size_t p = pos_ + w.size();
    while (p < s_.size() && std::isspace(static_cast<unsigned char>(s_[p]))) ++p;
    return p < s_.size() && s_[p] == '[';
  }

  double parse_number() {
    skip_ws();
    const std::size_t start = pos_;
    std::size_t e = pos_;
    if (e < s_.size() && (s_[e] == '+' || s_[e] == '-')) ++e;
    while (e < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[e])) || s_[e] == '.' ||
                             s_[e] == 'e' || s_[e] == 'E' ||
                             ((s_[e] == '+' || s_[e] == '-') && e > start &&
                              (s_[e - 1] == 'e' || s_[e - 1] == 'E'))))
      ++e;
    double v = 0.0;
    const char* first = s_.data() + start;
    const char* last = s_.data() + e;
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || first == last) fail_at("malformed number", start);
    pos_ = e;
    return v;
  }

  Interval parse_interval() {
    expect('[');
    const std::size_t at = pos_;
    const double a = parse_number();
    expect(',');
    const double b = parse_number();
    expect(']');
    if (a < 0.0 || b < 0.0) fail_at("interval endpoints must be non-negative", at);
    if (a > b) fail_at("interval endpoints out of order", at);
    return Interval{a, b};
  }

  std::string parse_ident() {
    const auto w = peek_word();
    if (w.empty()) fail("expected predicate name");
    const std::size_t at = pos_;
    pos_ += w.size();
    std::string name(w);
    if (preds_ && !preds_->contains(name)) fail_at("unknown predicate '" + name + "'", at);
    return name;
  }

  Formula parse_and() {
    std::vector<Formula> parts{parse_until()};
    while (peek('&')) {
      ++pos_;
      parts.push_back(parse_until());
    }
    if (parts.size() == 1) return parts.front();
    return Formula::conj(std::move(parts));
  }

  Formula parse_until() {
    Formula lhs = parse_unary();
    while (at_operator("U")) {
      pos_ += 1;
      const Interval i = parse_interval();
      Formula rhs = parse_unary();
      lhs = Formula::until(i, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Formula parse_unary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Formula f = parse_and();
      expect(')');
      return f;
    }
    if (c == '!') {
      ++pos_;
      return Formula::not_pred(parse_ident());
    }
    if (at_operator("G")) {
      pos_ += 1;
      const Interval i = parse_interval();
      return Formula::always(i, parse_unary());
    }
    if (at_operator("F")) {
      pos_ += 1;
      const Interval i = parse_interval();
      return Formula::eventually(i, parse_unary());
    }
    const auto w = peek_word();
    if (w == "T") {
      pos_ += 1;
      return Formula::top();
    }
    if (w.empty()) fail(std::string("unexpected character '") + c + "'");
    return Formula::pred(parse_ident());
  }

  std::string_view s_;
  const PredicateTable* preds_;
  std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string format_interval(const Interval& i) {
  return "[" + format_number(i.lo) + "," + format_number(i.hi) + "]";
}

inline std::string format_impl(const Formula& f);

// Operand of a unary temporal operator or of U: conjunctions and untils need
// parentheses to survive a re-parse.
inline std::string format_operand(const Formula& f, bool allow_until) {
  if (f.is(FormulaKind::And) || (f.is(FormulaKind::Until) && !allow_until))
    return "(" + format_impl(f) + ")";
  return format_impl(f);
}

inline std::string format_impl(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::True: return "T";
    case FormulaKind::Pred: return f.name();
    case FormulaKind::NotPred: return "!" + f.name();
    case FormulaKind::And: {
      std::string out;
      for (std::size_t k = 0; k < f.children().size(); ++k) {
        if (k) out += " & ";
        const auto& c = f.children()[k];
        out += c.is(FormulaKind::And) ? "(" + format_impl(c) + ")" : format_impl(c);
      }
      return out;
    }
    case FormulaKind::Always:
      return "G" + format_interval(f.interval()) + " " + format_operand(f.child(), false);
    case FormulaKind::Eventually:
      return "F" + format_interval(f.interval()) + " " + format_operand(f.child(), false);
    case FormulaKind::Until:
      return format_operand(f.child(0), true) + " U" + format_interval(f.interval()) + " " +
             format_operand(f.child(1), false);
  }
  return {};
}

}  // namespace detail

/// Parses formula text. Every identifier must name an entry of `predicates`.
inline Formula parse_formula(std::string_view text, const PredicateTable& predicates) {
  return detail::Parser(text, &predicates).parse();
}

/// Parses without resolving identifiers; for tooling that only needs the AST.
inline Formula parse_formula_unchecked(std::string_view text) {
  return detail::Parser(text, nullptr).parse();
}

/// Canonical text form; parse_formula(format_formula(f)) == f.
inline std::string format_formula(const Formula& f) { return detail::format_impl(f); }

}  // namespace stlcbf
