#include "elegance/itcdsl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace elegance::itcdsl {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct PredSig {
  PredKind kind;
  int n_ids;
  int n_nums;
};

const std::map<std::string, PredSig>& pred_table() {
  static const std::map<std::string, PredSig> table = {
      {"in", {PredKind::In, 2, 0}},
      {"on", {PredKind::On, 2, 0}},
      {"isgrasping", {PredKind::IsGrasping, 1, 0}},
      {"isonbottomof", {PredKind::IsOnBottomOf, 2, 0}},
      {"ispreciselyon", {PredKind::IsPreciselyOn, 2, 1}},
      {"isorientationaligned", {PredKind::IsOrientationAligned, 1, 2}},
      {"positionunchanged", {PredKind::PositionUnchanged, 1, 1}},
  };
  return table;
}

struct Token {
  enum Kind { LParen, RParen, Symbol, Number, End } kind;
  std::string text;
  double value = 0.0;
  int line = 1, column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= text_.size()) {
      t.kind = Token::End;
      return t;
    }
    char c = text_[pos_];
    if (c == '(') {
      advance();
      t.kind = Token::LParen;
      return t;
    }
    if (c == ')') {
      advance();
      t.kind = Token::RParen;
      return t;
    }
    size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')')
      advance();
    t.text = std::string(text_.substr(start, pos_ - start));
    char c0 = t.text[0];
    if (std::isdigit(static_cast<unsigned char>(c0)) ||
        ((c0 == '-' || c0 == '+' || c0 == '.') && t.text.size() > 1 &&
         (std::isdigit(static_cast<unsigned char>(t.text[1])) || t.text[1] == '.'))) {
      char* end = nullptr;
      t.value = std::strtod(t.text.c_str(), &end);
      if (end != t.text.c_str() + t.text.size())
        throw ParseError(t.line, t.column, "malformed number '" + t.text + "'");
      t.kind = Token::Number;
    } else {
      t.kind = Token::Symbol;
    }
    return t;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {  // comment to end of line
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) { cur_ = lexer_.next(); }

  Expr parse_expr() {
    if (cur_.kind != Token::LParen)
      throw ParseError(cur_.line, cur_.column, "expected '('");
    Token open = cur_;
    consume();
    if (cur_.kind != Token::Symbol)
      throw ParseError(cur_.line, cur_.column, "expected operator or predicate name");
    std::string head = lower(cur_.text);
    Token head_tok = cur_;
    consume();

    Expr e;
    if (head == "and" || head == "or") {
      e.op = head == "and" ? NodeOp::And : NodeOp::Or;
      while (cur_.kind == Token::LParen) e.children.push_back(parse_expr());
      if (e.children.empty())
        throw ParseError(head_tok.line, head_tok.column, "'" + head + "' needs at least one operand");
    } else if (head == "not" || head == "always" || head == "eventually" || head == "atrelease") {
      e.op = head == "not"          ? NodeOp::Not
             : head == "always"     ? NodeOp::Always
             : head == "eventually" ? NodeOp::Eventually
                                    : NodeOp::AtRelease;
      e.children.push_back(parse_expr());
    } else {
      auto it = pred_table().find(head);
      if (it == pred_table().end())
        throw ParseError(head_tok.line, head_tok.column, "unknown predicate '" + head_tok.text + "'");
      e.op = NodeOp::Atom;
      e.pred = it->second.kind;
      for (int i = 0; i < it->second.n_ids; ++i) {
        if (cur_.kind != Token::Symbol)
          throw ParseError(cur_.line, cur_.column,
                           std::string(pred_name(e.pred)) + " expects a symbol argument");
        e.ids.push_back(cur_.text);
        consume();
      }
      for (int i = 0; i < it->second.n_nums; ++i) {
        if (cur_.kind != Token::Number)
          throw ParseError(cur_.line, cur_.column,
                           std::string(pred_name(e.pred)) + " expects a numeric argument");
        e.nums.push_back(cur_.value);
        consume();
      }
    }
    if (cur_.kind != Token::RParen)
      throw ParseError(cur_.line, cur_.column, "expected ')' to close form opened at " +
                                                   std::to_string(open.line) + ":" +
                                                   std::to_string(open.column));
    consume();
    return e;
  }

  void expect_end() {
    if (cur_.kind != Token::End)
      throw ParseError(cur_.line, cur_.column, "trailing content after expression");
  }

 private:
  void consume() { cur_ = lexer_.next(); }
  Lexer lexer_;
  Token cur_;
};

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* pred_name(PredKind kind) {
  switch (kind) {
    case PredKind::In: return "In";
    case PredKind::On: return "On";
    case PredKind::IsGrasping: return "IsGrasping";
    case PredKind::IsOnBottomOf: return "IsOnBottomOf";
    case PredKind::IsPreciselyOn: return "IsPreciselyOn";
    case PredKind::IsOrientationAligned: return "IsOrientationAligned";
    case PredKind::PositionUnchanged: return "PositionUnchanged";
  }
  return "?";
}

Expr parse(std::string_view text) {
  Parser p(text);
  Expr e = p.parse_expr();
  p.expect_end();

  // Tolerances must be positive; target angles may be any real.
  struct Walk {
    static void check(const Expr& e) {
      if (e.op == NodeOp::Atom) {
        if (e.pred == PredKind::IsPreciselyOn && e.nums[0] <= 0.0)
          throw ConfigError("IsPreciselyOn tolerance must be positive");
        if (e.pred == PredKind::IsOrientationAligned && e.nums[1] <= 0.0)
          throw ConfigError("IsOrientationAligned tolerance must be positive");
        if (e.pred == PredKind::PositionUnchanged && e.nums[0] <= 0.0)
          throw ConfigError("PositionUnchanged tolerance must be positive");
      }
      for (const Expr& c : e.children) check(c);
    }
  };
  Walk::check(e);
  return e;
}

std::string print_expr(const Expr& e) {
  std::string out = "(";
  switch (e.op) {
    case NodeOp::And: out += "and"; break;
    case NodeOp::Or: out += "or"; break;
    case NodeOp::Not: out += "not"; break;
    case NodeOp::Always: out += "always"; break;
    case NodeOp::Eventually: out += "eventually"; break;
    case NodeOp::AtRelease: out += "atrelease"; break;
    case NodeOp::Atom: out += pred_name(e.pred); break;
  }
  if (e.op == NodeOp::Atom) {
    for (const std::string& id : e.ids) out += " " + id;
    for (double v : e.nums) out += " " + format_number(v);
  } else {
    for (const Expr& c : e.children) out += " " + print_expr(c);
  }
  out += ")";
  return out;
}

Expr atom(PredKind kind, std::vector<std::string> ids, std::vector<double> nums) {
  Expr e;
  e.op = NodeOp::Atom;
  e.pred = kind;
  e.ids = std::move(ids);
  e.nums = std::move(nums);
  return e;
}

static Expr combo(NodeOp op, std::vector<Expr> children) {
  Expr e;
  e.op = op;
  e.children = std::move(children);
  return e;
}

Expr all_of(std::vector<Expr> children) { return combo(NodeOp::And, std::move(children)); }
Expr any_of(std::vector<Expr> children) { return combo(NodeOp::Or, std::move(children)); }
Expr negate(Expr child) { return combo(NodeOp::Not, {std::move(child)}); }
Expr always(Expr child) { return combo(NodeOp::Always, {std::move(child)}); }
Expr eventually(Expr child) { return combo(NodeOp::Eventually, {std::move(child)}); }
Expr at_release(Expr child) { return combo(NodeOp::AtRelease, {std::move(child)}); }

std::vector<std::string> referenced_ids(const Expr& expr) {
  std::vector<std::string> out;
  struct Walk {
    static void run(const Expr& e, std::vector<std::string>& out) {
      for (const std::string& id : e.ids)
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
      for (const Expr& c : e.children) run(c, out);
    }
  };
  Walk::run(expr, out);
  return out;
}

}  // namespace elegance::itcdsl
