#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "elegance/itc_eval.hpp"
#include "elegance/itcdsl.hpp"

using namespace elegance;
using namespace elegance::itcdsl;

namespace {

// Random well-formed AST for the round-trip property.
Expr random_expr(Rng& rng, int depth, const std::vector<std::string>& objs = {"obj", "book", "pot"},
                 const std::vector<std::string>& regs = {"basket", "caddy", "plate"}) {
  auto obj = [&] { return objs[rng.uniform_int(static_cast<int>(objs.size()))]; };
  auto reg = [&] { return regs[rng.uniform_int(static_cast<int>(regs.size()))]; };
  if (depth <= 0 || rng.uniform01() < 0.35) {
    switch (rng.uniform_int(7)) {
      case 0: return atom(PredKind::In, {obj(), reg()});
      case 1: return atom(PredKind::On, {obj(), reg()});
      case 2: return atom(PredKind::IsGrasping, {obj()});
      case 3: return atom(PredKind::IsOnBottomOf, {obj(), reg()});
      case 4: return atom(PredKind::IsPreciselyOn, {obj(), reg()}, {rng.uniform(1e-6, 2.0)});
      case 5:
        return atom(PredKind::IsOrientationAligned, {obj()}, {rng.uniform(-3.0, 3.0), rng.uniform(1e-6, 1.0)});
      default: return atom(PredKind::PositionUnchanged, {obj()}, {rng.uniform(1e-6, 1.0)});
    }
  }
  switch (rng.uniform_int(6)) {
    case 0: {
      std::vector<Expr> kids;
      int n = 1 + rng.uniform_int(3);
      for (int i = 0; i < n; ++i) kids.push_back(random_expr(rng, depth - 1, objs, regs));
      return all_of(std::move(kids));
    }
    case 1: {
      std::vector<Expr> kids;
      int n = 1 + rng.uniform_int(3);
      for (int i = 0; i < n; ++i) kids.push_back(random_expr(rng, depth - 1, objs, regs));
      return any_of(std::move(kids));
    }
    case 2: return negate(random_expr(rng, depth - 1, objs, regs));
    case 3: return always(random_expr(rng, depth - 1, objs, regs));
    case 4: return eventually(random_expr(rng, depth - 1, objs, regs));
    default: return at_release(random_expr(rng, depth - 1, objs, regs));
  }
}

// Two-object, one-region trajectory builder for evaluation tests.
struct Traj {
  world::WorldState initial;
  std::vector<world::WorldState> states;
  std::vector<world::StepEvents> events;

  Traj() {
    initial.objects = {{"obj", 0.0, 0.0, 0.0, 0.05, false}, {"other", 0.5, -0.5, 0.0, 0.05, false}};
    initial.regions = {{"basket", world::RegionKind::container, 0.4, 0.4, 0.15}};
  }
  // appends a state with obj at (x, y, angle); events default empty
  void add(double x, double y, double angle = 0.0, bool held = false) {
    world::WorldState s = states.empty() ? initial : states.back();
    s.time = static_cast<int>(states.size()) + 1;
    s.objects[0].x = x;
    s.objects[0].y = y;
    s.objects[0].angle = angle;
    s.objects[0].held = held;
    states.push_back(s);
    events.push_back({});
  }
  void release_at(int step) {
    events[step].released = true;
    events[step].released_id = "obj";
  }
  EvalContext ctx() const {
    EvalContext c;
    c.initial = &initial;
    c.states = states;
    c.events = events;
    c.task_object = "obj";
    return c;
  }
};

}  // namespace

TEST_CASE("single atom parses") {
  Expr e = parse("(In obj basket)");
  CHECK(e.op == NodeOp::Atom);
  CHECK(e.pred == PredKind::In);
  CHECK(e.ids == std::vector<std::string>{"obj", "basket"});
}

TEST_CASE("nested combinators parse structurally") {
  Expr e = parse("(and (Eventually (In b r)) (AtRelease (IsGrasping b)))");
  CHECK(e.op == NodeOp::And);
  REQUIRE(e.children.size() == 2);
  CHECK(e.children[0].op == NodeOp::Eventually);
  CHECK(e.children[0].children[0].pred == PredKind::In);
  CHECK(e.children[1].op == NodeOp::AtRelease);
  CHECK(e.children[1].children[0].pred == PredKind::IsGrasping);
}

TEST_CASE("print is canonical") {
  Expr e = all_of({atom(PredKind::In, {"a", "b"}), atom(PredKind::IsGrasping, {"a"})});
  CHECK(print_expr(e) == "(and (In a b) (IsGrasping a))");
  Expr nn = negate(negate(atom(PredKind::IsGrasping, {"a"})));
  CHECK(print_expr(nn) == "(not (not (IsGrasping a)))");  // no simplification
}

TEST_CASE("round-trip: parse(print(ast)) == ast over 200 random ASTs") {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(derive_seed(seed, "ast"));
    Expr e = random_expr(rng, 4);
    std::string text = print_expr(e);
    Expr back = parse(text);
    CHECK(back == e);
    CHECK(print_expr(back) == text);
  }
}

TEST_CASE("parse errors carry position and kind") {
  CHECK_THROWS_AS(parse("(In obj"), ParseError);
  CHECK_THROWS_AS(parse("(Frobnicate obj basket)"), ParseError);
  CHECK_THROWS_AS(parse("(IsGrasping)"), ParseError);   // arity
  CHECK_THROWS_AS(parse("(In obj basket) extra"), ParseError);
  try {
    parse("(and (In a b)\n   (Broken x))");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.column > 1);
  }
  // tolerances must be positive
  CHECK_THROWS_AS(parse("(IsPreciselyOn a b -0.5)"), ConfigError);
  CHECK_THROWS_AS(parse("(PositionUnchanged a 0)"), ConfigError);
}

TEST_CASE("IsPreciselyOn threshold and monotonicity in tolerance") {
  Traj t;
  t.add(0.41, 0.4);  // distance 0.01 from region center (0.4, 0.4)
  CHECK(evaluate(parse("(IsPreciselyOn obj basket 0.02)"), t.ctx()));
  CHECK_FALSE(evaluate(parse("(IsPreciselyOn obj basket 0.005)"), t.ctx()));
  // monotonicity: true at tol implies true at any larger tol
  for (uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    Traj r;
    r.add(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-3, 3));
    double tol = rng.uniform(0.01, 1.0);
    double larger = tol + rng.uniform(0.0, 1.0);
    auto at = [&](double tl) {
      return evaluate(atom(PredKind::IsPreciselyOn, {"obj", "basket"}, {tl}), r.ctx());
    };
    if (at(tol)) CHECK(at(larger));
    auto align = [&](double tl) {
      return evaluate(atom(PredKind::IsOrientationAligned, {"obj"}, {0.5, tl}), r.ctx());
    };
    if (align(tol)) CHECK(align(larger));
    auto pos = [&](double tl) {
      return evaluate(atom(PredKind::PositionUnchanged, {"obj"}, {tl}), r.ctx());
    };
    if (pos(tol)) CHECK(pos(larger));
  }
}

TEST_CASE("AtRelease is false when the object is never released") {
  Traj t;
  t.add(0.4, 0.4);
  CHECK_FALSE(evaluate(parse("(AtRelease (In obj basket))"), t.ctx()));
}

TEST_CASE("AtRelease evaluates at the first release of the task object") {
  Traj t;
  t.add(0.0, 0.0);   // step 0: drop far from the basket
  t.add(0.4, 0.4);   // step 1: later release inside
  t.release_at(0);
  t.release_at(1);
  CHECK_FALSE(evaluate(parse("(AtRelease (In obj basket))"), t.ctx()));
}

TEST_CASE("IsOnBottomOf needs containment, a free object, and an inside release") {
  Traj ok;
  ok.add(0.4, 0.4);
  ok.release_at(0);
  CHECK(evaluate(parse("(IsOnBottomOf obj basket)"), ok.ctx()));

  // released outside, later pushed in: last release was outside
  Traj pushed;
  pushed.add(0.6, 0.7);  // outside extent 0.15
  pushed.add(0.42, 0.42);
  pushed.release_at(0);
  CHECK(evaluate(parse("(In obj basket)"), pushed.ctx()));
  CHECK_FALSE(evaluate(parse("(IsOnBottomOf obj basket)"), pushed.ctx()));

  // still held at the end
  Traj held;
  held.add(0.4, 0.4, 0.0, true);
  CHECK_FALSE(evaluate(parse("(IsOnBottomOf obj basket)"), held.ctx()));
}

TEST_CASE("PositionUnchanged tracks the worst-case displacement") {
  Traj t;
  t.add(0.0, 0.0);
  t.add(0.05, 0.0);  // excursion
  t.add(0.0, 0.0);   // returns
  CHECK_FALSE(evaluate(parse("(PositionUnchanged obj 0.03)"), t.ctx()));
  CHECK(evaluate(parse("(PositionUnchanged obj 0.06)"), t.ctx()));
}

TEST_CASE("default evaluation point is the final step") {
  Traj t;
  t.add(0.4, 0.4);  // inside at step 0
  t.add(-0.8, -0.8);
  CHECK_FALSE(evaluate(parse("(In obj basket)"), t.ctx()));
  CHECK(evaluate(parse("(Eventually (In obj basket))"), t.ctx()));
  CHECK_FALSE(evaluate(parse("(Always (In obj basket))"), t.ctx()));
}

TEST_CASE("boolean algebra on random expressions") {
  Traj t;
  t.add(0.4, 0.4, 1.0);
  t.add(0.3, 0.3, -0.5);
  t.release_at(1);
  auto c = t.ctx();
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(seed, "bool"));
    Expr a = random_expr(rng, 2, {"obj", "other"}, {"basket"});
    Expr b = random_expr(rng, 2, {"obj", "other"}, {"basket"});
    bool va = evaluate(a, c), vb = evaluate(b, c);
    CHECK(evaluate(negate(a), c) == !va);
    CHECK(evaluate(all_of({a, b}), c) == (va && vb));
    CHECK(evaluate(any_of({a, b}), c) == (va || vb));
    // Always(e) implies Eventually(e) on non-empty trajectories
    if (evaluate(always(a), c)) CHECK(evaluate(eventually(a), c));
  }
}

TEST_CASE("evaluate rejects unbound ids and empty trajectories") {
  Traj t;
  t.add(0, 0);
  CHECK_THROWS_AS(evaluate(parse("(In ghost basket)"), t.ctx()), ConfigError);
  CHECK_THROWS_AS(evaluate(parse("(In obj nowhere)"), t.ctx()), ConfigError);
  Traj empty;
  EvalContext c;
  c.initial = &empty.initial;
  c.task_object = "obj";
  CHECK_THROWS_AS(evaluate(parse("(IsGrasping obj)"), c), ConfigError);
}
