#pragma once

#include <cctype>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ltnc {

struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(const std::string& msg, int line_, int col_)
      : std::runtime_error(msg + " at line " + std::to_string(line_) + ", column " +
                           std::to_string(col_)),
        line(line_),
        column(col_) {}
};

enum class FormulaKind : std::uint8_t {
  atom,
  negation,
  conjunction,
  disjunction,
  implication,
  forall,
  exists,
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// Immutable formula tree. Atoms name a predicate applied to variables; a
/// quantifier binds one variable, whose name doubles as the name of the data
/// partition it ranges over.
struct Formula {
  FormulaKind kind;
  std::string predicate;               // atom
  std::vector<std::string> variables;  // atom arguments
  std::string bound_var;               // forall / exists
  FormulaPtr left;                     // unary child, binary lhs, quantifier body
  FormulaPtr right;                    // binary rhs

  static FormulaPtr atom(std::string pred, std::vector<std::string> vars) {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::atom;
    f->predicate = std::move(pred);
    f->variables = std::move(vars);
    return f;
  }
  static FormulaPtr negation(FormulaPtr a) {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::negation;
    f->left = std::move(a);
    return f;
  }
  static FormulaPtr conjunction(FormulaPtr a, FormulaPtr b) { return binary(FormulaKind::conjunction, std::move(a), std::move(b)); }
  static FormulaPtr disjunction(FormulaPtr a, FormulaPtr b) { return binary(FormulaKind::disjunction, std::move(a), std::move(b)); }
  static FormulaPtr implication(FormulaPtr a, FormulaPtr b) { return binary(FormulaKind::implication, std::move(a), std::move(b)); }
  static FormulaPtr forall(std::string var, FormulaPtr body) { return quantifier(FormulaKind::forall, std::move(var), std::move(body)); }
  static FormulaPtr exists(std::string var, FormulaPtr body) { return quantifier(FormulaKind::exists, std::move(var), std::move(body)); }

 private:
  static FormulaPtr binary(FormulaKind k, FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<Formula>();
    f->kind = k;
    f->left = std::move(a);
    f->right = std::move(b);
    return f;
  }
  static FormulaPtr quantifier(FormulaKind k, std::string var, FormulaPtr body) {
    auto f = std::make_shared<Formula>();
    f->kind = k;
    f->bound_var = std::move(var);
    f->left = std::move(body);
    return f;
  }
};

inline bool formula_equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case FormulaKind::atom:
      return a->predicate == b->predicate && a->variables == b->variables;
    case FormulaKind::negation:
      return formula_equal(a->left, b->left);
    case FormulaKind::conjunction:
    case FormulaKind::disjunction:
    case FormulaKind::implication:
      return formula_equal(a->left, b->left) && formula_equal(a->right, b->right);
    case FormulaKind::forall:
    case FormulaKind::exists:
      return a->bound_var == b->bound_var && formula_equal(a->left, b->left);
  }
  return false;
}

namespace detail {

inline void collect_free(const FormulaPtr& f, std::set<std::string>& bound,
                         std::set<std::string>& out) {
  switch (f->kind) {
    case FormulaKind::atom:
      for (const auto& v : f->variables)
        if (!bound.count(v)) out.insert(v);
      break;
    case FormulaKind::negation:
      collect_free(f->left, bound, out);
      break;
    case FormulaKind::conjunction:
    case FormulaKind::disjunction:
    case FormulaKind::implication:
      collect_free(f->left, bound, out);
      collect_free(f->right, bound, out);
      break;
    case FormulaKind::forall:
    case FormulaKind::exists: {
      bool inserted = bound.insert(f->bound_var).second;
      collect_free(f->left, bound, out);
      if (inserted) bound.erase(f->bound_var);
      break;
    }
  }
}

}  // namespace detail

/// Exact set of variables not bound by any enclosing quantifier.
inline std::set<std::string> free_variables(const FormulaPtr& f) {
  std::set<std::string> bound, out;
  detail::collect_free(f, bound, out);
  return out;
}

// ---------------------------------------------------------------------------
// Pretty printer. Precedence: "=>" < "or" < "and" < "not" < atom; quantifiers
// bind weakest and their body extends as far right as possible, so a
// quantifier in any non-root position is parenthesized.

namespace detail {

inline int precedence(FormulaKind k) {
  switch (k) {
    case FormulaKind::forall:
    case FormulaKind::exists: return 0;
    case FormulaKind::implication: return 1;
    case FormulaKind::disjunction: return 2;
    case FormulaKind::conjunction: return 3;
    case FormulaKind::negation: return 4;
    case FormulaKind::atom: return 5;
  }
  return 5;
}

inline void print_formula(const FormulaPtr& f, int min_prec, std::string& out) {
  const int prec = precedence(f->kind);
  const bool parens = prec < min_prec;
  if (parens) out += '(';
  switch (f->kind) {
    case FormulaKind::atom: {
      out += f->predicate;
      out += '(';
      for (std::size_t i = 0; i < f->variables.size(); ++i) {
        if (i) out += ", ";
        out += f->variables[i];
      }
      out += ')';
      break;
    }
    case FormulaKind::negation:
      out += "not ";
      print_formula(f->left, 4, out);
      break;
    case FormulaKind::conjunction:
      print_formula(f->left, 3, out);
      out += " and ";
      print_formula(f->right, 4, out);
      break;
    case FormulaKind::disjunction:
      print_formula(f->left, 2, out);
      out += " or ";
      print_formula(f->right, 3, out);
      break;
    case FormulaKind::implication:
      print_formula(f->left, 2, out);
      out += " => ";
      print_formula(f->right, 1, out);
      break;
    case FormulaKind::forall:
    case FormulaKind::exists:
      out += f->kind == FormulaKind::forall ? "forall " : "exists ";
      out += f->bound_var;
      out += ": ";
      print_formula(f->left, 0, out);
      break;
  }
  if (parens) out += ')';
}

}  // namespace detail

inline std::string formula_to_text(const FormulaPtr& f) {
  std::string out;
  detail::print_formula(f, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Lexer + recursive-descent parser for the concrete syntax:
//
//   formula := "forall" VAR ":" formula | "exists" VAR ":" formula | expr
//   expr    := or_expr [ "=>" formula ]          (right associative)
//   or_expr := and_expr { "or" and_expr }
//   and_expr:= unary { "and" unary }
//   unary   := "not" unary | quantifier | "(" formula ")" | atom
//   atom    := IDENT "(" VAR { "," VAR } ")"
//
// Keywords are case-sensitive; identifiers are [A-Za-z_][A-Za-z0-9_]*.

namespace detail {

enum class TokKind : std::uint8_t { ident, lparen, rparen, comma, colon, arrow, end };

struct Token {
  TokKind kind;
  std::string text;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src, int first_line = 1) : src_(src), line_(first_line) {}

  Token next() {
    skip_ws();
    int line = line_, col = col_;
    if (pos_ >= src_.size()) return {TokKind::end, "", line, col};
    char c = src_[pos_];
    if (c == '(') { advance(); return {TokKind::lparen, "(", line, col}; }
    if (c == ')') { advance(); return {TokKind::rparen, ")", line, col}; }
    if (c == ',') { advance(); return {TokKind::comma, ",", line, col}; }
    if (c == ':') { advance(); return {TokKind::colon, ":", line, col}; }
    if (c == '=') {
      if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
        advance();
        advance();
        return {TokKind::arrow, "=>", line, col};
      }
      throw ParseError("stray '='; did you mean '=>'?", line, col);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string text;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        text += src_[pos_];
        advance();
      }
      return {TokKind::ident, std::move(text), line, col};
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {  // comment to end of line
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_;
  int col_ = 1;
};

class FormulaParser {
 public:
  FormulaParser(const std::string& src, int first_line) : lexer_(src, first_line) {
    cur_ = lexer_.next();
  }

  FormulaPtr parse() {
    FormulaPtr f = parse_formula();
    expect(TokKind::end, "end of formula");
    return f;
  }

 private:
  FormulaPtr parse_formula() {
    if (cur_.kind == TokKind::ident && (cur_.text == "forall" || cur_.text == "exists")) {
      bool universal = cur_.text == "forall";
      bump();
      Token var = expect_ident("quantified variable");
      expect(TokKind::colon, "':' after quantified variable");
      FormulaPtr body = parse_formula();
      return universal ? Formula::forall(var.text, std::move(body))
                       : Formula::exists(var.text, std::move(body));
    }
    return parse_implication();
  }

  FormulaPtr parse_implication() {
    FormulaPtr lhs = parse_or();
    if (cur_.kind == TokKind::arrow) {
      bump();
      FormulaPtr rhs = parse_formula();  // right associative, quantifiers allowed
      return Formula::implication(std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  FormulaPtr parse_or() {
    FormulaPtr lhs = parse_and();
    while (cur_.kind == TokKind::ident && cur_.text == "or") {
      bump();
      lhs = Formula::disjunction(std::move(lhs), parse_and());
    }
    return lhs;
  }

  FormulaPtr parse_and() {
    FormulaPtr lhs = parse_unary();
    while (cur_.kind == TokKind::ident && cur_.text == "and") {
      bump();
      lhs = Formula::conjunction(std::move(lhs), parse_unary());
    }
    return lhs;
  }

  FormulaPtr parse_unary() {
    if (cur_.kind == TokKind::ident && cur_.text == "not") {
      bump();
      return Formula::negation(parse_unary());
    }
    if (cur_.kind == TokKind::ident && (cur_.text == "forall" || cur_.text == "exists"))
      return parse_formula();
    if (cur_.kind == TokKind::lparen) {
      bump();
      FormulaPtr inner = parse_formula();
      expect(TokKind::rparen, "')'");
      return inner;
    }
    return parse_atom();
  }

  FormulaPtr parse_atom() {
    Token pred = expect_ident("predicate name");
    if (is_keyword(pred.text))
      throw ParseError("keyword '" + pred.text + "' cannot be used as a predicate", pred.line,
                       pred.column);
    expect(TokKind::lparen, "'(' after predicate name");
    std::vector<std::string> vars;
    for (;;) {
      Token v = expect_ident("variable name");
      if (is_keyword(v.text))
        throw ParseError("keyword '" + v.text + "' cannot be used as a variable", v.line, v.column);
      vars.push_back(v.text);
      if (cur_.kind == TokKind::comma) {
        bump();
        continue;
      }
      break;
    }
    expect(TokKind::rparen, "')' after atom arguments");
    return Formula::atom(pred.text, std::move(vars));
  }

  static bool is_keyword(const std::string& s) {
    return s == "forall" || s == "exists" || s == "not" || s == "and" || s == "or";
  }

  void bump() { cur_ = lexer_.next(); }

  Token expect_ident(const char* what) {
    if (cur_.kind != TokKind::ident)
      throw ParseError(std::string("expected ") + what, cur_.line, cur_.column);
    Token t = cur_;
    bump();
    return t;
  }

  void expect(TokKind k, const char* what) {
    if (cur_.kind != k)
      throw ParseError(std::string("expected ") + what +
                           (cur_.kind == TokKind::end ? "" : ", got '" + cur_.text + "'"),
                       cur_.line, cur_.column);
    bump();
  }

  Lexer lexer_;
  Token cur_;
};

}  // namespace detail

/// Parse a single formula. first_line offsets error positions, used when the
/// text is embedded in a larger file.
inline FormulaPtr parse_formula(const std::string& text, int first_line = 1) {
  return detail::FormulaParser(text, first_line).parse();
}

}  // namespace ltnc
