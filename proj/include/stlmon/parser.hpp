#pragma once

// Tokenizer and recursive-descent parser for `.stl` specification files.
//
//   spec       := { "signal" IDENT ":" type } { "rule" IDENT ":" formula }
//   type       := "real" | "bool" | "enum" "{" IDENT { "," IDENT } "}"
//   formula    := or_f [ "->" formula ]                  (right associative)
//   or_f       := and_f { "||" and_f }
//   and_f      := until_f { "&&" until_f }
//   until_f    := unary { "U" interval unary }           (left associative)
//   unary      := "!" unary | ("G" | "F") [ interval ] unary | primary
//   primary    := IDENT ("==" | "!=") (IDENT | "true" | "false")
//               | expr cmp expr
//               | IDENT                                   (bool signal is true)
//               | "(" formula ")"
//   interval   := "[" NUMBER "," (NUMBER | "inf") "]"
//   expr       := term { ("+" | "-") term }
//   term       := factor { ("*" | "/") factor }
//   factor     := "-" factor | NUMBER | IDENT | "abs" "(" expr ")"
//               | "deriv" "(" IDENT ")" | "(" expr ")"

#include <charconv>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stlmon/ast.hpp"

namespace stlmon {

struct SourceSpan {
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
  std::size_t length = 1;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(SourceSpan span, const std::string& message, std::vector<std::string> expected = {})
      : std::runtime_error(format(span, message, expected)),
        span_(span),
        message_(message),
        expected_(std::move(expected)) {}

  const SourceSpan& span() const { return span_; }
  const std::string& message() const { return message_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  static std::string format(const SourceSpan& s, const std::string& msg, const std::vector<std::string>& exp) {
    std::string out = std::to_string(s.line) + ":" + std::to_string(s.column) + ": " + msg;
    if (!exp.empty()) {
      out += " (expected ";
      for (std::size_t i = 0; i < exp.size(); ++i) out += (i ? ", " : "") + exp[i];
      out += ")";
    }
    return out;
  }

  SourceSpan span_;
  std::string message_;
  std::vector<std::string> expected_;
};

enum class TokenKind {
  kw_signal, kw_rule, kw_real, kw_bool, kw_enum,
  kw_globally, kw_eventually, kw_until, kw_inf, kw_true, kw_false,
  identifier, number,
  lt, le, gt, ge, eq, ne, arrow, and_, or_, not_,
  plus, minus, star, slash,
  lparen, rparen, lbracket, rbracket, lbrace, rbrace, comma, colon,
  end,
};

inline const char* describe(TokenKind k) {
  switch (k) {
    case TokenKind::kw_signal: return "'signal'";
    case TokenKind::kw_rule: return "'rule'";
    case TokenKind::kw_real: return "'real'";
    case TokenKind::kw_bool: return "'bool'";
    case TokenKind::kw_enum: return "'enum'";
    case TokenKind::kw_globally: return "'G'";
    case TokenKind::kw_eventually: return "'F'";
    case TokenKind::kw_until: return "'U'";
    case TokenKind::kw_inf: return "'inf'";
    case TokenKind::kw_true: return "'true'";
    case TokenKind::kw_false: return "'false'";
    case TokenKind::identifier: return "identifier";
    case TokenKind::number: return "number";
    case TokenKind::lt: return "'<'";
    case TokenKind::le: return "'<='";
    case TokenKind::gt: return "'>'";
    case TokenKind::ge: return "'>='";
    case TokenKind::eq: return "'=='";
    case TokenKind::ne: return "'!='";
    case TokenKind::arrow: return "'->'";
    case TokenKind::and_: return "'&&'";
    case TokenKind::or_: return "'||'";
    case TokenKind::not_: return "'!'";
    case TokenKind::plus: return "'+'";
    case TokenKind::minus: return "'-'";
    case TokenKind::star: return "'*'";
    case TokenKind::slash: return "'/'";
    case TokenKind::lparen: return "'('";
    case TokenKind::rparen: return "')'";
    case TokenKind::lbracket: return "'['";
    case TokenKind::rbracket: return "']'";
    case TokenKind::lbrace: return "'{'";
    case TokenKind::rbrace: return "'}'";
    case TokenKind::comma: return "','";
    case TokenKind::colon: return "':'";
    case TokenKind::end: return "end of input";
  }
  return "?";
}

struct Token {
  TokenKind kind = TokenKind::end;
  std::string text;
  double number = 0.0;  // TokenKind::number only
  SourceSpan span;
};

inline std::vector<Token> tokenize(std::string_view src) {
  static const std::pair<std::string_view, TokenKind> keywords[] = {
      {"signal", TokenKind::kw_signal}, {"rule", TokenKind::kw_rule},   {"real", TokenKind::kw_real},
      {"bool", TokenKind::kw_bool},     {"enum", TokenKind::kw_enum},   {"G", TokenKind::kw_globally},
      {"F", TokenKind::kw_eventually},  {"U", TokenKind::kw_until},     {"inf", TokenKind::kw_inf},
      {"true", TokenKind::kw_true},     {"false", TokenKind::kw_false},
  };
  static const std::pair<std::string_view, TokenKind> symbols[] = {
      // two-character operators first: longest match wins
      {"<=", TokenKind::le},     {">=", TokenKind::ge},       {"==", TokenKind::eq},
      {"!=", TokenKind::ne},     {"->", TokenKind::arrow},    {"&&", TokenKind::and_},
      {"||", TokenKind::or_},    {"<", TokenKind::lt},        {">", TokenKind::gt},
      {"!", TokenKind::not_},    {"+", TokenKind::plus},      {"-", TokenKind::minus},
      {"*", TokenKind::star},    {"/", TokenKind::slash},     {"(", TokenKind::lparen},
      {")", TokenKind::rparen},  {"[", TokenKind::lbracket},  {"]", TokenKind::rbracket},
      {"{", TokenKind::lbrace},  {"}", TokenKind::rbrace},    {",", TokenKind::comma},
      {":", TokenKind::colon},
  };

  auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };

  std::vector<Token> out;
  std::size_t i = 0, line = 1, line_start = 0;
  auto span_at = [&](std::size_t pos, std::size_t len) {
    return SourceSpan{line, pos - line_start + 1, len == 0 ? 1 : len};
  };

  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++i;
      ++line;
      line_start = i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (is_alpha(c)) {
      std::size_t j = i;
      while (j < src.size() && (is_alpha(src[j]) || is_digit(src[j]))) ++j;
      Token t{TokenKind::identifier, std::string(src.substr(i, j - i)), 0.0, span_at(i, j - i)};
      for (const auto& [kw, kind] : keywords)
        if (t.text == kw) t.kind = kind;
      out.push_back(std::move(t));
      i = j;
      continue;
    }
    if (is_digit(c)) {
      std::size_t j = i;
      while (j < src.size() && is_digit(src[j])) ++j;
      if (j + 1 < src.size() && src[j] == '.' && is_digit(src[j + 1])) {
        ++j;
        while (j < src.size() && is_digit(src[j])) ++j;
      }
      Token t{TokenKind::number, std::string(src.substr(i, j - i)), 0.0, span_at(i, j - i)};
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number,
                                 std::chars_format::fixed);
      if (res.ec != std::errc{}) throw ParseError(t.span, "numeric literal out of range");
      out.push_back(std::move(t));
      i = j;
      continue;
    }
    bool matched = false;
    for (const auto& [sym, kind] : symbols) {
      if (src.substr(i, sym.size()) == sym) {
        out.push_back(Token{kind, std::string(sym), 0.0, span_at(i, sym.size())});
        i += sym.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      std::string shown = (static_cast<unsigned char>(c) >= 0x20 && static_cast<unsigned char>(c) < 0x7f)
                              ? std::string("'") + c + "'"
                              : "byte 0x" + std::string(1, "0123456789abcdef"[(c >> 4) & 0xf]) +
                                    std::string(1, "0123456789abcdef"[c & 0xf]);
      throw ParseError(span_at(i, 1), "unrecognized character " + shown);
    }
  }
  out.push_back(Token{TokenKind::end, "", 0.0, span_at(i, 1)});
  return out;
}

namespace detail {

inline constexpr std::size_t kMaxNesting = 200;

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Specification spec() {
    Specification s;
    while (at(TokenKind::kw_signal)) s.declarations.push_back(declaration());
    while (at(TokenKind::kw_rule)) {
      advance();
      const Token& name = expect(TokenKind::identifier, "rule name");
      std::string rule_name = name.text;
      rule_spans_.push_back(name.span);
      expect(TokenKind::colon);
      Formula f = formula();
      s.rules.push_back(Rule{std::move(rule_name), std::move(f)});
    }
    if (at(TokenKind::kw_signal))
      throw ParseError(peek().span, "signal declarations must precede rules");
    if (!at(TokenKind::end))
      fail({describe(TokenKind::kw_signal), describe(TokenKind::kw_rule), describe(TokenKind::end)});
    return s;
  }

  Formula lone_formula() {
    Formula f = formula();
    expect(TokenKind::end);
    return f;
  }

  void set_declarations(const std::vector<SignalDecl>* decls) { decls_ = decls; }
  const std::vector<SourceSpan>& rule_spans() const { return rule_spans_; }

 private:
  // -- token helpers -------------------------------------------------------
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t k = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[k];
  }
  bool at(TokenKind k) const { return peek().kind == k; }
  const Token& advance() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool accept(TokenKind k) {
    if (!at(k)) return false;
    advance();
    return true;
  }
  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const Token& t = peek();
    std::string found = t.kind == TokenKind::end ? "end of input" : "'" + t.text + "'";
    throw ParseError(t.span, "unexpected " + found, std::move(expected));
  }
  const Token& expect(TokenKind k, const char* what = nullptr) {
    if (!at(k)) fail({what ? what : describe(k)});
    return advance();
  }

  struct DepthGuard {
    DepthGuard(Parser& p) : p(p) {
      if (++p.depth_ > kMaxNesting) throw ParseError(p.peek().span, "nesting too deep");
    }
    ~DepthGuard() { --p.depth_; }
    Parser& p;
  };

  const SignalDecl* lookup(const std::string& name) const {
    if (!decls_) return nullptr;
    for (const auto& d : *decls_)
      if (d.name == name) return &d;
    return nullptr;
  }

  // -- declarations ---------------------------------------------------------
  SignalDecl declaration() {
    expect(TokenKind::kw_signal);
    SignalDecl d;
    d.name = expect(TokenKind::identifier, "signal name").text;
    expect(TokenKind::colon);
    if (accept(TokenKind::kw_real)) {
      d.kind = SignalKind::real;
    } else if (accept(TokenKind::kw_bool)) {
      d.kind = SignalKind::boolean;
    } else if (accept(TokenKind::kw_enum)) {
      d.kind = SignalKind::enumeration;
      expect(TokenKind::lbrace);
      d.variants.push_back(expect(TokenKind::identifier, "variant name").text);
      while (accept(TokenKind::comma)) d.variants.push_back(expect(TokenKind::identifier, "variant name").text);
      expect(TokenKind::rbrace);
    } else {
      fail({describe(TokenKind::kw_real), describe(TokenKind::kw_bool), describe(TokenKind::kw_enum)});
    }
    own_decls_.push_back(d);
    decls_ = &own_decls_;
    return d;
  }

  // -- formulas -------------------------------------------------------------
  Formula formula() {
    DepthGuard guard(*this);
    Formula lhs = or_formula();
    if (accept(TokenKind::arrow)) return formula::implies(std::move(lhs), formula());
    return lhs;
  }

  Formula or_formula() {
    Formula lhs = and_formula();
    while (accept(TokenKind::or_)) lhs = formula::disj(std::move(lhs), and_formula());
    return lhs;
  }

  Formula and_formula() {
    Formula lhs = until_formula();
    while (accept(TokenKind::and_)) lhs = formula::conj(std::move(lhs), until_formula());
    return lhs;
  }

  Formula until_formula() {
    Formula lhs = unary();
    while (at(TokenKind::kw_until)) {
      advance();
      if (!at(TokenKind::lbracket)) fail({"interval after 'U'"});
      Interval i = interval();
      lhs = formula::until(i, std::move(lhs), unary());
    }
    return lhs;
  }

  Formula unary() {
    DepthGuard guard(*this);
    if (accept(TokenKind::not_)) return formula::negation(unary());
    if (at(TokenKind::kw_globally) || at(TokenKind::kw_eventually)) {
      bool g = advance().kind == TokenKind::kw_globally;
      Interval i;
      if (at(TokenKind::lbracket)) i = interval();
      Formula arg = unary();
      return g ? formula::globally(i, std::move(arg)) : formula::eventually(i, std::move(arg));
    }
    return primary();
  }

  Interval interval() {
    expect(TokenKind::lbracket);
    Interval i;
    i.lo = expect(TokenKind::number, "interval lower bound").number;
    expect(TokenKind::comma);
    if (accept(TokenKind::kw_inf)) {
      i.hi = kUnbounded;
    } else {
      i.hi = expect(TokenKind::number, "interval upper bound or 'inf'").number;
    }
    expect(TokenKind::rbracket);
    return i;
  }

  static bool is_compare(TokenKind k) {
    return k == TokenKind::lt || k == TokenKind::le || k == TokenKind::gt || k == TokenKind::ge;
  }

  Formula primary() {
    // signal == variant / signal != variant / signal == true
    if (at(TokenKind::identifier) && (peek(1).kind == TokenKind::eq || peek(1).kind == TokenKind::ne)) {
      std::string sig = advance().text;
      bool negated = advance().kind == TokenKind::ne;
      if (at(TokenKind::kw_true) || at(TokenKind::kw_false)) {
        bool value = advance().kind == TokenKind::kw_true;
        return formula::bool_is(sig, value != negated);
      }
      std::string variant = expect(TokenKind::identifier, "variant name, 'true' or 'false'").text;
      const SignalDecl* d = lookup(sig);
      if (d && d->kind == SignalKind::boolean)
        throw ParseError(toks_[pos_ - 1].span, "bool signal '" + sig + "' compared with a non-boolean");
      return formula::enum_eq(sig, variant, negated);
    }

    // expr cmp expr, retried as a parenthesized formula when it does not fit
    std::size_t start = pos_;
    std::optional<ParseError> expr_error;
    try {
      SignalExpr lhs = expression();
      if (is_compare(peek().kind)) {
        CompareOp op = compare_op(advance().kind);
        SignalExpr rhs = expression();
        return formula::compare(std::move(lhs), op, std::move(rhs));
      }
      // bare bool signal
      if (pos_ == start + 1 && toks_[start].kind == TokenKind::identifier)
        return formula::bool_is(toks_[start].text, true);
      fail({"comparison operator"});
    } catch (const ParseError& e) {
      if (e.message() == "nesting too deep") throw;
      expr_error = e;
    }
    pos_ = start;
    if (at(TokenKind::lparen)) {
      try {
        advance();
        Formula f = formula();
        expect(TokenKind::rparen);
        return f;
      } catch (const ParseError& e) {
        // report whichever reading got further into the input
        if (e.message() == "nesting too deep" || !before(e.span(), expr_error->span())) throw;
      }
    }
    throw *expr_error;
  }

  static bool before(const SourceSpan& a, const SourceSpan& b) {
    return a.line < b.line || (a.line == b.line && a.column < b.column);
  }

  static CompareOp compare_op(TokenKind k) {
    switch (k) {
      case TokenKind::lt: return CompareOp::lt;
      case TokenKind::le: return CompareOp::le;
      case TokenKind::gt: return CompareOp::gt;
      default: return CompareOp::ge;
    }
  }

  // -- signal expressions ---------------------------------------------------
  SignalExpr expression() {
    DepthGuard guard(*this);
    SignalExpr lhs = term();
    while (at(TokenKind::plus) || at(TokenKind::minus)) {
      ArithOp op = advance().kind == TokenKind::plus ? ArithOp::add : ArithOp::sub;
      lhs = expr::arith(op, std::move(lhs), term());
    }
    return lhs;
  }

  SignalExpr term() {
    SignalExpr lhs = factor();
    while (at(TokenKind::star) || at(TokenKind::slash)) {
      ArithOp op = advance().kind == TokenKind::star ? ArithOp::mul : ArithOp::div;
      lhs = expr::arith(op, std::move(lhs), factor());
    }
    return lhs;
  }

  SignalExpr factor() {
    DepthGuard guard(*this);
    if (accept(TokenKind::minus)) {
      SignalExpr inner = factor();
      if (const auto* c = std::get_if<Constant>(&inner.node())) return expr::constant(-c->value);
      return expr::arith(ArithOp::sub, expr::constant(0.0), std::move(inner));
    }
    if (at(TokenKind::number)) return expr::constant(advance().number);
    if (at(TokenKind::identifier)) {
      const Token& t = advance();
      if (t.text == "abs" && at(TokenKind::lparen)) {
        advance();
        SignalExpr inner = expression();
        expect(TokenKind::rparen);
        return expr::abs(std::move(inner));
      }
      if (t.text == "deriv" && at(TokenKind::lparen)) {
        advance();
        std::string name = expect(TokenKind::identifier, "signal name").text;
        expect(TokenKind::rparen);
        return expr::deriv(std::move(name));
      }
      return expr::ref(t.text);
    }
    if (accept(TokenKind::lparen)) {
      SignalExpr inner = expression();
      expect(TokenKind::rparen);
      return inner;
    }
    fail({"number", "signal name", "'('", "'-'"});
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  const std::vector<SignalDecl>* decls_ = nullptr;
  std::vector<SignalDecl> own_decls_;
  std::vector<SourceSpan> rule_spans_;
};

}  // namespace detail

/// Parses and validates a complete specification.  Validation problems are
/// raised as ParseError located at the offending rule's name.
inline Specification parse_spec(std::string_view source) {
  detail::Parser p(tokenize(source));
  Specification spec = p.spec();
  auto diags = validate(spec);
  if (!diags.empty()) {
    const Diagnostic& d = diags.front();
    SourceSpan span{1, 1, 1};
    for (std::size_t i = 0; i < spec.rules.size(); ++i)
      if (spec.rules[i].name == d.rule) {
        span = p.rule_spans()[i];
        break;
      }
    throw ParseError(span, d.to_string());
  }
  return spec;
}

/// Parses a single formula.  `decls` is only consulted to reject bool/enum
/// confusion early; no validation is performed.
inline Formula parse_formula(std::string_view source, const std::vector<SignalDecl>& decls = {}) {
  detail::Parser p(tokenize(source));
  p.set_declarations(&decls);
  return p.lone_formula();
}

}  // namespace stlmon
