#include "elegance/itc_eval.hpp"

#include <cmath>

namespace elegance::itcdsl {

namespace {

constexpr double kPi = 3.14159265358979323846;

const world::ObjectState& object_at(const EvalContext& ctx, int t, const std::string& id) {
  const world::ObjectState* o = ctx.states[t].find_object(id);
  if (!o) throw ConfigError("predicate references unbound object id '" + id + "'");
  return *o;
}

const world::Region& region_of(const EvalContext& ctx, const std::string& id) {
  const world::Region* r = ctx.states[0].find_region(id);
  if (!r) throw ConfigError("predicate references unbound region id '" + id + "'");
  return *r;
}

double dist(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

int first_release_step(const EvalContext& ctx) {
  for (size_t t = 0; t < ctx.events.size(); ++t)
    if (ctx.events[t].released && ctx.events[t].released_id == ctx.task_object)
      return static_cast<int>(t);
  return -1;
}

int last_release_step(const EvalContext& ctx, const std::string& object_id) {
  for (int t = static_cast<int>(ctx.events.size()) - 1; t >= 0; --t)
    if (ctx.events[t].released && ctx.events[t].released_id == object_id) return t;
  return -1;
}

bool eval_at(const Expr& e, const EvalContext& ctx, int t);

bool eval_atom(const Expr& e, const EvalContext& ctx, int t) {
  int final_t = static_cast<int>(ctx.states.size()) - 1;
  switch (e.pred) {
    case PredKind::In:
    case PredKind::On: {
      const auto& o = object_at(ctx, t, e.ids[0]);
      const auto& r = region_of(ctx, e.ids[1]);
      return dist(o.x, o.y, r.cx, r.cy) <= r.extent;
    }
    case PredKind::IsGrasping:
      return object_at(ctx, t, e.ids[0]).held;
    case PredKind::IsPreciselyOn: {
      const auto& o = object_at(ctx, t, e.ids[0]);
      const auto& r = region_of(ctx, e.ids[1]);
      return dist(o.x, o.y, r.cx, r.cy) <= e.nums[0];
    }
    case PredKind::IsOrientationAligned: {
      const auto& o = object_at(ctx, t, e.ids[0]);
      return std::fabs(wrap_angle(o.angle - e.nums[0])) <= e.nums[1];
    }
    case PredKind::PositionUnchanged: {
      // Whole-trajectory: max displacement from the initial pose.
      const world::ObjectState* base = ctx.initial->find_object(e.ids[0]);
      if (!base) throw ConfigError("predicate references unbound object id '" + e.ids[0] + "'");
      double worst = 0.0;
      for (const auto& s : ctx.states) {
        const world::ObjectState* o = s.find_object(e.ids[0]);
        if (!o) throw ConfigError("object '" + e.ids[0] + "' missing from trajectory state");
        worst = std::max(worst, dist(o->x, o->y, base->x, base->y));
      }
      return worst <= e.nums[0];
    }
    case PredKind::IsOnBottomOf: {
      const auto& o = object_at(ctx, final_t, e.ids[0]);
      const auto& r = region_of(ctx, e.ids[1]);
      if (o.held) return false;
      if (dist(o.x, o.y, r.cx, r.cy) > r.extent) return false;
      int rel = last_release_step(ctx, e.ids[0]);
      if (rel < 0) return false;
      const world::ObjectState& at_rel = object_at(ctx, rel, e.ids[0]);
      return dist(at_rel.x, at_rel.y, r.cx, r.cy) <= r.extent;
    }
  }
  return false;
}

bool eval_at(const Expr& e, const EvalContext& ctx, int t) {
  switch (e.op) {
    case NodeOp::Atom:
      return eval_atom(e, ctx, t);
    case NodeOp::And:
      for (const Expr& c : e.children)
        if (!eval_at(c, ctx, t)) return false;
      return true;
    case NodeOp::Or:
      for (const Expr& c : e.children)
        if (eval_at(c, ctx, t)) return true;
      return false;
    case NodeOp::Not:
      return !eval_at(e.children[0], ctx, t);
    case NodeOp::Always:
      for (size_t i = 0; i < ctx.states.size(); ++i)
        if (!eval_at(e.children[0], ctx, static_cast<int>(i))) return false;
      return true;
    case NodeOp::Eventually:
      for (size_t i = 0; i < ctx.states.size(); ++i)
        if (eval_at(e.children[0], ctx, static_cast<int>(i))) return true;
      return false;
    case NodeOp::AtRelease: {
      int rel = first_release_step(ctx);
      if (rel < 0) return false;
      return eval_at(e.children[0], ctx, rel);
    }
  }
  return false;
}

}  // namespace

double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a < -kPi) a += 2 * kPi;
  return a;
}

bool evaluate(const Expr& expr, const EvalContext& ctx) {
  if (ctx.states.empty()) throw ConfigError("evaluate: empty trajectory");
  if (!ctx.initial) throw ConfigError("evaluate: missing initial state");
  return eval_at(expr, ctx, static_cast<int>(ctx.states.size()) - 1);
}

}  // namespace elegance::itcdsl
