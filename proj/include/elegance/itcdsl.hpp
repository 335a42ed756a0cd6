#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "elegance/common.hpp"

namespace elegance::itcdsl {

// Atoms over objects/regions plus boolean and temporal combinators. Concrete
// syntax is s-expressions: (and (eventually (In book caddy)) (not e)).
enum class PredKind {
  In,
  On,
  IsGrasping,
  IsOnBottomOf,
  IsPreciselyOn,
  IsOrientationAligned,
  PositionUnchanged,
};

enum class NodeOp { Atom, And, Or, Not, Always, Eventually, AtRelease };

struct Expr {
  NodeOp op = NodeOp::Atom;
  PredKind pred = PredKind::In;        // valid when op == Atom
  std::vector<std::string> ids;        // symbol arguments, in order
  std::vector<double> nums;            // numeric arguments, in order
  std::vector<Expr> children;

  bool operator==(const Expr&) const = default;
};

struct ParseError : ConfigError {
  int line, column;
  ParseError(int line_, int col_, const std::string& msg)
      : ConfigError("parse error at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg),
        line(line_),
        column(col_) {}
};

Expr parse(std::string_view text);

// Canonical text: single spaces, lowercase combinators, canonical predicate
// names, shortest-round-trip numbers. parse(print_expr(e)) == e.
std::string print_expr(const Expr& expr);

const char* pred_name(PredKind kind);

// Helpers for constructing expressions in code/tests.
Expr atom(PredKind kind, std::vector<std::string> ids, std::vector<double> nums = {});
Expr all_of(std::vector<Expr> children);
Expr any_of(std::vector<Expr> children);
Expr negate(Expr child);
Expr always(Expr child);
Expr eventually(Expr child);
Expr at_release(Expr child);

// Every symbol referenced by atoms, in first-appearance order.
std::vector<std::string> referenced_ids(const Expr& expr);

}  // namespace elegance::itcdsl
