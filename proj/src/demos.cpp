#include "elegance/demos.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>

#include "elegance/world_json.hpp"

namespace elegance::world {

using nlohmann::json;

void to_json(json& j, const Region& r) {
  j = json{{"id", r.id}, {"kind", region_kind_name(r.kind)}, {"cx", r.cx}, {"cy", r.cy}, {"extent", r.extent}};
}
void from_json(const json& j, Region& r) {
  r.id = j.at("id");
  r.kind = region_kind_from_name(j.at("kind"));
  r.cx = j.at("cx");
  r.cy = j.at("cy");
  r.extent = j.at("extent");
}

void to_json(json& j, const ObjectState& o) {
  j = json{{"id", o.id}, {"x", o.x},           {"y", o.y},
           {"angle", o.angle}, {"radius", o.radius}, {"held", o.held}};
}
void from_json(const json& j, ObjectState& o) {
  o.id = j.at("id");
  o.x = j.at("x");
  o.y = j.at("y");
  o.angle = j.at("angle");
  o.radius = j.at("radius");
  o.held = j.at("held");
}

void to_json(json& j, const GripperState& g) { j = json{{"x", g.x}, {"y", g.y}, {"grip", g.grip}}; }
void from_json(const json& j, GripperState& g) {
  g.x = j.at("x");
  g.y = j.at("y");
  g.grip = j.at("grip");
}

void to_json(json& j, const WorldState& s) {
  j = json{{"time", s.time},       {"gripper", s.gripper},   {"objects", s.objects},
           {"regions", s.regions}, {"held_index", s.held_index}, {"hold_dx", s.hold_dx},
           {"hold_dy", s.hold_dy}};
}
void from_json(const json& j, WorldState& s) {
  s.time = j.at("time");
  s.gripper = j.at("gripper");
  s.objects = j.at("objects").get<std::vector<ObjectState>>();
  if (j.contains("regions")) s.regions = j.at("regions").get<std::vector<Region>>();
  s.held_index = j.at("held_index");
  s.hold_dx = j.at("hold_dx");
  s.hold_dy = j.at("hold_dy");
}

void to_json(json& j, const Action& a) {
  j = json{{"dx", a.dx}, {"dy", a.dy}, {"dangle", a.dangle}, {"grip", a.grip_cmd}};
}
void from_json(const json& j, Action& a) {
  a.dx = j.at("dx");
  a.dy = j.at("dy");
  a.dangle = j.at("dangle");
  a.grip_cmd = j.at("grip");
}

void to_json(json& j, const StepEvents& e) {
  j = json{{"grasp_started", e.grasp_started},
           {"released", e.released},
           {"grasped_id", e.grasped_id},
           {"released_id", e.released_id},
           {"collisions", e.collisions},
           {"displacements", e.displacements}};
}
void from_json(const json& j, StepEvents& e) {
  e.grasp_started = j.at("grasp_started");
  e.released = j.at("released");
  e.grasped_id = j.at("grasped_id");
  e.released_id = j.at("released_id");
  e.collisions = j.at("collisions").get<std::vector<std::pair<std::string, std::string>>>();
  e.displacements = j.at("displacements").get<std::map<std::string, double>>();
}

void to_json(json& j, const WorldConstants& c) {
  j = json{{"a_max", c.a_max},
           {"angle_max", c.angle_max},
           {"grasp_radius", c.grasp_radius},
           {"gripper_radius", c.gripper_radius},
           {"clearance", c.clearance}};
}
void from_json(const json& j, WorldConstants& c) {
  c.a_max = j.at("a_max");
  c.angle_max = j.at("angle_max");
  c.grasp_radius = j.at("grasp_radius");
  c.gripper_radius = j.at("gripper_radius");
  c.clearance = j.at("clearance");
}

}  // namespace elegance::world

namespace elegance::demos {

using world::Action;
using world::Region;
using world::TaskSpec;
using world::WorldState;
using nlohmann::json;

std::string profile_name(ProfileKind k) {
  switch (k) {
    case ProfileKind::expert: return "expert";
    case ProfileKind::premature_release: return "premature_release";
    case ProfileKind::sloppy_placement: return "sloppy_placement";
    case ProfileKind::misaligned: return "misaligned";
    case ProfileKind::collision_prone: return "collision_prone";
    case ProfileKind::hesitant: return "hesitant";
  }
  return "?";
}

ProfileKind profile_from_name(const std::string& s) {
  for (ProfileKind k : all_profiles())
    if (profile_name(k) == s) return k;
  throw ConfigError("unknown demo profile: " + s);
}

std::vector<ProfileKind> all_profiles() {
  return {ProfileKind::expert,     ProfileKind::premature_release, ProfileKind::sloppy_placement,
          ProfileKind::misaligned, ProfileKind::collision_prone,   ProfileKind::hesitant};
}

DemoProfile default_profile(ProfileKind kind) {
  DemoProfile p;
  p.kind = kind;
  p.noise_scale = kind == ProfileKind::expert ? 0.006 : 0.008;
  return p;
}

std::string reward_mode_name(RewardMode m) {
  return m == RewardMode::task_specific ? "task_specific" : "binary_terminal";
}

RewardMode reward_mode_from_name(const std::string& s) {
  if (s == "task_specific") return RewardMode::task_specific;
  if (s == "binary_terminal") return RewardMode::binary_terminal;
  throw ConfigError("unknown reward mode: " + s);
}

// --- scripted controller -----------------------------------------------------

namespace {

struct Vec2 {
  double x = 0, y = 0;
};

double dist(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

Vec2 toward(double fx, double fy, double tx, double ty, double speed) {
  double dx = tx - fx, dy = ty - fy;
  double d = std::hypot(dx, dy);
  if (d <= speed || d < 1e-12) return {dx, dy};
  return {dx * speed / d, dy * speed / d};
}

// Approach with proportional slowdown near the goal; the velocity is then a
// smooth function of the gap, which the chunked policy imitates much better
// than a hard stop.
Vec2 approach(double fx, double fy, double tx, double ty, double speed) {
  double d = std::hypot(tx - fx, ty - fy);
  return toward(fx, fy, tx, ty, std::min(speed, 0.45 * d + 0.006));
}

enum class PhaseKind { MoveTo, MoveToObject, Grasp, Release, Pause, Wander, PushTo, Hold };

struct Phase {
  PhaseKind kind = PhaseKind::Hold;
  double x = 0, y = 0;
  double tol = 0.015;
  bool offset_by_hold = false;  // target is where the held object should end up
  bool rotate = false;
  int duration = 1;
  // Sustained grip command while the phase runs. Holding the command rather
  // than pulsing it makes the channel a smooth function of state, which the
  // chunked policy can actually imitate, and missed grasps retry themselves.
  double grip = -1.0;
};

struct Plan {
  std::vector<Phase> phases;
  double angle_target = 0;
  bool has_angle_target = false;
  double noise_scale = 0;
  size_t cur = 0;
  int steps_in_phase = 0;
  int push_stage = 0;  // 0 stage behind, 1 close, 2 advance
};

Action finalize(Action a, const Plan& plan, Rng& rng, bool add_noise, const TaskSpec& task) {
  if (add_noise && plan.noise_scale > 0) {
    a.dx += plan.noise_scale * rng.normal();
    a.dy += plan.noise_scale * rng.normal();
    a.dangle += plan.noise_scale * rng.normal();
  }
  (void)task;
  return a;
}

const world::ObjectState& task_obj(const TaskSpec& task, const WorldState& s) {
  const world::ObjectState* o = s.find_object(task.task_object);
  if (!o) throw ConfigError("task " + task.id + ": task_object missing from state");
  return *o;
}

// Returns the tolerance of the IsPreciselyOn atom binding the task object to
// the target region, if the elegance expression has one.
std::optional<double> precision_tol(const TaskSpec& task) {
  std::optional<double> found;
  struct Walk {
    static void run(const itcdsl::Expr& e, const TaskSpec& task, std::optional<double>& found) {
      if (e.op == itcdsl::NodeOp::Atom && e.pred == itcdsl::PredKind::IsPreciselyOn &&
          e.ids[0] == task.task_object)
        found = e.nums[0];
      for (const auto& c : e.children) run(c, task, found);
    }
  };
  Walk::run(task.elegance_expr, task, found);
  return found;
}

std::optional<double> angle_tol(const TaskSpec& task) {
  std::optional<double> found;
  struct Walk {
    static void run(const itcdsl::Expr& e, const TaskSpec& task, std::optional<double>& found) {
      if (e.op == itcdsl::NodeOp::Atom && e.pred == itcdsl::PredKind::IsOrientationAligned &&
          e.ids[0] == task.task_object)
        found = e.nums[1];
      for (const auto& c : e.children) run(c, task, found);
    }
  };
  Walk::run(task.elegance_expr, task, found);
  return found;
}

Phase retreat_phase(const TaskSpec& task, Vec2 from) {
  double sx = task.layout.gripper_start.x - from.x;
  double sy = task.layout.gripper_start.y - from.y;
  double d = std::max(std::hypot(sx, sy), 1e-9);
  Phase ph;
  ph.kind = PhaseKind::MoveTo;
  ph.x = from.x + sx / d * std::min(0.25, d);
  ph.y = from.y + sy / d * std::min(0.25, d);
  ph.tol = 0.05;
  return ph;
}

void assign_grip_intents(Plan& plan, bool push_task) {
  // Push plans keep the paddle down from the first step; the keepout slide
  // already prevents accidental shoving on the way to the staging point, and
  // a constant grip channel is far easier for the policy to reproduce.
  double cur = push_task ? 1.0 : -1.0;
  for (Phase& ph : plan.phases) {
    if (ph.kind == PhaseKind::Grasp || ph.kind == PhaseKind::PushTo) cur = 1.0;
    if (ph.kind == PhaseKind::Release) cur = -1.0;
    ph.grip = cur;
  }
}

Plan build_plan(const TaskSpec& task, const DemoProfile& profile, const WorldState& start, Rng& rng) {
  Plan plan;
  plan.noise_scale = profile.noise_scale;
  const Region* target = nullptr;
  if (!task.target_region.empty()) target = start.find_region(task.target_region);
  if (!target) throw ConfigError("task " + task.id + ": target_region missing");
  const world::ObjectState& obj0 = task_obj(task, start);
  bool skip_waypoints = profile.kind == ProfileKind::collision_prone;

  if (task.push_task) {
    std::vector<Vec2> legs;
    if (!skip_waypoints) {
      for (const auto& wp : task.exit_waypoints) legs.push_back({wp.x, wp.y});
    } else {
      // graze route: shove the object across the nearest bystander
      const world::ObjectState* nearest = nullptr;
      double best = 1e9;
      for (const auto& o : start.objects) {
        if (o.id == task.task_object) continue;
        double d = dist(o.x, o.y, obj0.x, obj0.y);
        if (d < best) {
          best = d;
          nearest = &o;
        }
      }
      if (nearest) legs.push_back({nearest->x, nearest->y});
    }
    legs.push_back({target->cx, target->cy});
    for (size_t i = 0; i < legs.size(); ++i) {
      Phase ph;
      ph.kind = PhaseKind::PushTo;
      ph.x = legs[i].x;
      ph.y = legs[i].y;
      ph.tol = i + 1 == legs.size() ? target->extent * 0.45 : 0.06;
      plan.phases.push_back(ph);
      if (profile.kind == ProfileKind::hesitant)
        plan.phases.push_back({PhaseKind::Pause, 0, 0, 0.0, false, false, profile.pause_steps});
    }
    plan.phases.push_back({PhaseKind::Release, 0, 0, 0.0, false, false, 1});
    plan.phases.push_back(retreat_phase(task, {target->cx, target->cy}));
    plan.phases.push_back({PhaseKind::Hold});
    assign_grip_intents(plan, true);
    return plan;
  }

  // pick-and-place
  if (task.place_angle) {
    plan.has_angle_target = true;
    plan.angle_target = *task.place_angle;
    if (profile.kind == ProfileKind::misaligned) {
      double tol = angle_tol(task).value_or(0.2);
      double err = tol * rng.uniform(profile.misalign_lo, profile.misalign_hi);
      plan.angle_target += rng.uniform01() < 0.5 ? err : -err;
    }
  }

  if (!skip_waypoints)
    for (const auto& wp : task.approach_waypoints)
      plan.phases.push_back({PhaseKind::MoveTo, wp.x, wp.y, 0.03, false, false, 1});
  if (profile.kind == ProfileKind::hesitant)
    plan.phases.push_back({PhaseKind::Pause, 0, 0, 0.0, false, false, profile.pause_steps});
  plan.phases.push_back({PhaseKind::MoveToObject, 0, 0, 0.012, false, false, 1});
  plan.phases.push_back({PhaseKind::Grasp, 0, 0, 0.0, false, false, 2});

  size_t mid_insert = std::string::npos;  // where a hesitant drop-regrasp goes
  if (!skip_waypoints && !task.exit_waypoints.empty()) {
    for (size_t i = 0; i < task.exit_waypoints.size(); ++i) {
      const auto& wp = task.exit_waypoints[i];
      plan.phases.push_back({PhaseKind::MoveTo, wp.x, wp.y, 0.03, false, true, 1});
      if (i == 0) mid_insert = plan.phases.size();
    }
  } else {
    mid_insert = plan.phases.size();
  }

  if (profile.kind == ProfileKind::hesitant && mid_insert != std::string::npos) {
    std::vector<Phase> correction = {
        {PhaseKind::Release, 0, 0, 0.0, false, false, 1},
        {PhaseKind::Wander, 0, 0, 0.0, false, false, 3},
        {PhaseKind::MoveToObject, 0, 0, 0.012, false, false, 1},
        {PhaseKind::Grasp, 0, 0, 0.0, false, false, 2},
        {PhaseKind::Pause, 0, 0, 0.0, false, false, profile.pause_steps},
    };
    plan.phases.insert(plan.phases.begin() + mid_insert, correction.begin(), correction.end());
  }

  Vec2 place{target->cx, target->cy};
  if (profile.kind == ProfileKind::sloppy_placement) {
    double base = precision_tol(task).value_or(target->extent * 0.3);
    double off = std::min(base * rng.uniform(profile.sloppy_lo, profile.sloppy_hi), target->extent * 0.85);
    double theta = rng.uniform(0, 2 * 3.14159265358979323846);
    place.x += off * std::cos(theta);
    place.y += off * std::sin(theta);
  }

  if (profile.kind == ProfileKind::premature_release) {
    // Let go outside the rim, then shove the object the rest of the way.
    double margin = rng.uniform(profile.early_margin_lo, profile.early_margin_hi);
    Vec2 from = task.exit_waypoints.empty() || skip_waypoints
                    ? Vec2{obj0.x, obj0.y}
                    : Vec2{task.exit_waypoints.back().x, task.exit_waypoints.back().y};
    double d = dist(from.x, from.y, target->cx, target->cy);
    double ux = d < 1e-9 ? 1.0 : (from.x - target->cx) / d;
    double uy = d < 1e-9 ? 0.0 : (from.y - target->cy) / d;
    double r = target->extent + margin;
    plan.phases.push_back(
        {PhaseKind::MoveTo, target->cx + ux * r, target->cy + uy * r, 0.015, true, true, 1});
    plan.phases.push_back({PhaseKind::Release, 0, 0, 0.0, false, false, 2});
    plan.phases.push_back({PhaseKind::PushTo, target->cx, target->cy, target->extent * 0.45, false, false, 1});
    plan.phases.push_back({PhaseKind::Release, 0, 0, 0.0, false, false, 1});
  } else {
    plan.phases.push_back({PhaseKind::MoveTo, place.x, place.y, 0.012, true, true, 1});
    plan.phases.push_back({PhaseKind::Release, 0, 0, 0.0, false, false, 2});
  }

  plan.phases.push_back(retreat_phase(task, {target->cx, target->cy}));
  plan.phases.push_back({PhaseKind::Hold});
  assign_grip_intents(plan, false);
  return plan;
}

Action plan_step(Plan& plan, const TaskSpec& task, const WorldState& s, Rng& rng) {
  const world::WorldConstants& c = task.constants;
  Action a;
  bool add_noise = true;

  for (int guard = 0; guard < 32; ++guard) {
    if (plan.cur >= plan.phases.size()) return Action{};  // hold, no noise
    Phase& ph = plan.phases[plan.cur];
    switch (ph.kind) {
      case PhaseKind::Hold: {
        Action idle;
        idle.grip_cmd = ph.grip;
        return idle;
      }
      case PhaseKind::MoveTo:
      case PhaseKind::MoveToObject: {
        double tx = ph.x, ty = ph.y;
        if (ph.kind == PhaseKind::MoveToObject) {
          const auto& o = task_obj(task, s);
          tx = o.x;
          ty = o.y;
        } else if (ph.offset_by_hold && s.held_index >= 0) {
          tx -= s.hold_dx;
          ty -= s.hold_dy;
        }
        if (dist(s.gripper.x, s.gripper.y, tx, ty) <= ph.tol) {
          ++plan.cur;
          plan.steps_in_phase = 0;
          continue;
        }
        Vec2 d = approach(s.gripper.x, s.gripper.y, tx, ty, c.a_max);
        a.dx = d.x;
        a.dy = d.y;
        a.grip_cmd = ph.grip;
        if (ph.rotate && plan.has_angle_target && s.held_index >= 0) {
          double cur_angle = s.objects[s.held_index].angle;
          double err = itcdsl::wrap_angle(plan.angle_target - cur_angle);
          a.dangle = std::clamp(err, -c.angle_max, c.angle_max);
        }
        return finalize(a, plan, rng, add_noise, task);
      }
      case PhaseKind::Grasp: {
        a.grip_cmd = 1.0;
        if (++plan.steps_in_phase >= ph.duration) {
          ++plan.cur;
          plan.steps_in_phase = 0;
        }
        return finalize(a, plan, rng, add_noise, task);
      }
      case PhaseKind::Release: {
        a.grip_cmd = -1.0;
        if (++plan.steps_in_phase >= ph.duration) {
          ++plan.cur;
          plan.steps_in_phase = 0;
        }
        return finalize(a, plan, rng, false, task);
      }
      case PhaseKind::Pause: {
        a.grip_cmd = ph.grip;
        if (++plan.steps_in_phase >= ph.duration) {
          ++plan.cur;
          plan.steps_in_phase = 0;
        }
        return finalize(a, plan, rng, add_noise, task);
      }
      case PhaseKind::Wander: {
        a.dx = 0.01 * rng.normal();
        a.dy = 0.01 * rng.normal();
        a.grip_cmd = ph.grip;
        if (++plan.steps_in_phase >= ph.duration) {
          ++plan.cur;
          plan.steps_in_phase = 0;
        }
        return a;
      }
      case PhaseKind::PushTo: {
        const auto& o = task_obj(task, s);
        if (dist(o.x, o.y, ph.x, ph.y) <= ph.tol) {
          ++plan.cur;
          plan.steps_in_phase = 0;
          plan.push_stage = 0;
          continue;
        }
        double r_sum = c.gripper_radius + o.radius;
        double d = dist(o.x, o.y, ph.x, ph.y);
        double ux = (o.x - ph.x) / std::max(d, 1e-9);
        double uy = (o.y - ph.y) / std::max(d, 1e-9);
        if (plan.push_stage == 0) {
          Vec2 staging{o.x + ux * (r_sum + 0.06), o.y + uy * (r_sum + 0.06)};
          if (dist(s.gripper.x, s.gripper.y, staging.x, staging.y) <= 0.02) {
            plan.push_stage = 1;
            continue;
          }
          a.grip_cmd = task.push_task ? 1.0 : -1.0;  // recovery shoves travel open
          double keepout = r_sum + 0.02;
          Vec2 step_v = toward(s.gripper.x, s.gripper.y, staging.x, staging.y, c.a_max);
          double nx = s.gripper.x + step_v.x, ny = s.gripper.y + step_v.y;
          if (dist(nx, ny, o.x, o.y) < keepout) {
            // slide along the keepout circle
            double rx = nx - o.x, ry = ny - o.y;
            double rn = std::max(std::hypot(rx, ry), 1e-9);
            nx = o.x + rx / rn * keepout;
            ny = o.y + ry / rn * keepout;
            step_v = toward(s.gripper.x, s.gripper.y, nx, ny, c.a_max);
          }
          a.dx = step_v.x;
          a.dy = step_v.y;
          return finalize(a, plan, rng, add_noise, task);
        }
        if (plan.push_stage == 1) {
          a.grip_cmd = 1.0;  // paddle down
          plan.push_stage = 2;
          return finalize(a, plan, rng, false, task);
        }
        // advance: aim slightly inside the contact ring so the object keeps
        // getting pushed toward the leg target
        Vec2 bp{o.x + ux * (r_sum * 0.8), o.y + uy * (r_sum * 0.8)};
        if (dist(s.gripper.x, s.gripper.y, bp.x, bp.y) > r_sum * 1.8) {
          plan.push_stage = 0;  // lost contact geometry, re-stage
          continue;
        }
        Vec2 step_v = toward(s.gripper.x, s.gripper.y, bp.x, bp.y, c.a_max);
        a.dx = step_v.x;
        a.dy = step_v.y;
        a.grip_cmd = 1.0;
        return finalize(a, plan, rng, add_noise, task);
      }
    }
  }
  return Action{};

}

}  // namespace

// --- episode generation ------------------------------------------------------

itcdsl::EvalContext eval_context(const Episode& ep, const TaskSpec& task,
                                 std::vector<WorldState>& states_buf,
                                 std::vector<world::StepEvents>& events_buf) {
  states_buf.clear();
  events_buf.clear();
  states_buf.reserve(ep.steps.size());
  events_buf.reserve(ep.steps.size());
  for (const auto& st : ep.steps) {
    states_buf.push_back(st.state);
    events_buf.push_back(st.events);
  }
  itcdsl::EvalContext ctx;
  ctx.initial = &ep.initial;
  ctx.states = states_buf;
  ctx.events = events_buf;
  ctx.task_object = task.task_object;
  return ctx;
}

Episode generate_demo(const TaskSpec& task, const DemoProfile& profile, uint64_t seed) {
  Episode ep;
  ep.task_id = task.id;
  ep.seed = seed;
  ep.initial = world::reset(task, derive_seed(seed, "reset"));
  Rng rng(derive_seed(seed, "demo"));
  WorldState state = ep.initial;
  Plan plan = build_plan(task, profile, state, rng);
  ep.steps.reserve(task.horizon);
  for (int t = 0; t < task.horizon; ++t) {
    EpisodeStep st;
    st.obs = world::observe(task, state);
    st.action = plan_step(plan, task, state, rng);
    auto [next, events] = world::step(task.constants, state, st.action);
    st.state = next;
    st.events = std::move(events);
    state = std::move(next);
    ep.steps.push_back(std::move(st));
  }
  ep.final_obs = world::observe(task, state);
  std::vector<WorldState> sb;
  std::vector<world::StepEvents> eb;
  auto ctx = eval_context(ep, task, sb, eb);
  ep.success = itcdsl::evaluate(task.success_expr, ctx);
  ep.elegant = ep.success && itcdsl::evaluate(task.elegance_expr, ctx);
  return ep;
}

// --- annotation ---------------------------------------------------------------

std::vector<RewardWindow> annotate(const Episode& ep, const TaskSpec& task, int window) {
  if (ep.steps.empty()) throw ConfigError("annotate: empty episode");
  int n = static_cast<int>(ep.steps.size());
  int anchor = -1;
  switch (task.dimension) {
    case world::EleganceDimension::sequence_integrity:
    case world::EleganceDimension::pose_alignment: {
      for (int t = 0; t < n && anchor < 0; ++t)
        if (ep.steps[t].events.released && ep.steps[t].events.released_id == task.task_object) anchor = t;
      break;
    }
    case world::EleganceDimension::pose_accuracy: {
      const Region* target = ep.initial.find_region(task.target_region);
      constexpr double kApproachRadius = 0.15;
      for (int t = 0; t < n && anchor < 0; ++t) {
        const world::ObjectState* o = ep.steps[t].state.find_object(task.task_object);
        if (o && o->held && target &&
            std::hypot(o->x - target->cx, o->y - target->cy) <= kApproachRadius)
          anchor = t;
      }
      if (anchor < 0)
        for (int t = 0; t < n && anchor < 0; ++t)
          if (ep.steps[t].events.released && ep.steps[t].events.released_id == task.task_object) anchor = t;
      break;
    }
    case world::EleganceDimension::collision_free: {
      double best = std::numeric_limits<double>::infinity();
      for (int t = 0; t < n; ++t) {
        const world::ObjectState* me = ep.steps[t].state.find_object(task.task_object);
        if (!me) continue;
        for (const auto& o : ep.steps[t].state.objects) {
          if (o.id == task.task_object) continue;
          double gap = std::hypot(me->x - o.x, me->y - o.y) - me->radius - o.radius;
          if (gap < best) {
            best = gap;
            anchor = t;
          }
        }
      }
      break;
    }
  }
  if (anchor < 0) anchor = n - 1;

  RewardWindow w;
  if (n < window) {
    w.start = 0;
    w.end = n - 1;
  } else {
    int start = anchor - window / 2;
    start = std::clamp(start, 0, n - window);
    w.start = start;
    w.end = start + window - 1;
  }
  std::vector<WorldState> sb;
  std::vector<world::StepEvents> eb;
  auto ctx = eval_context(ep, task, sb, eb);
  w.reward = itcdsl::evaluate(task.elegance_expr, ctx) ? 1 : 0;
  return {w};
}

// --- dataset -------------------------------------------------------------------

ElegantDataset build_dataset(std::span<const Episode> episodes, const std::vector<TaskSpec>& tasks,
                             int chunk_len, RewardMode mode, double gamma) {
  if (episodes.empty()) throw ConfigError("build_dataset: no episodes");
  if (chunk_len < 1) throw ConfigError("build_dataset: chunk_len must be >= 1");
  ElegantDataset ds;
  ds.chunk_len = chunk_len;
  ds.gamma = gamma;
  ds.reward_mode = mode;
  auto find_task = [&](const std::string& id) -> const TaskSpec& {
    for (const auto& t : tasks)
      if (t.id == id) return t;
    throw ConfigError("build_dataset: unknown task id " + id);
  };
  ds.constants = tasks.front().constants;
  {
    std::vector<std::string> seen;
    for (const Episode& ep : episodes) seen.push_back(ep.id());
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw ConfigError("build_dataset: duplicate episode id " +
                        *std::adjacent_find(seen.begin(), seen.end()));
  }
  for (const Episode& ep : episodes) {
    const TaskSpec& task = find_task(ep.task_id);
    if (std::find(ds.task_ids.begin(), ds.task_ids.end(), task.id) == ds.task_ids.end())
      ds.task_ids.push_back(task.id);
    int n = static_cast<int>(ep.steps.size());
    int n_chunks = n / chunk_len;
    if (n_chunks == 0) {
      ++ds.skipped_episodes;
      continue;
    }
    auto windows = annotate(ep, task);
    const RewardWindow& w = windows.front();
    std::vector<Transition> trs;
    for (int i = 0; i < n_chunks; ++i) {
      int t0 = i * chunk_len;
      Transition tr;
      tr.task_id = task.id;
      tr.episode = ep.id();
      tr.index = i;
      tr.obs = ep.steps[t0].obs.data;
      tr.chunk.resize(static_cast<size_t>(chunk_len) * world::kActionDim);
      for (int k = 0; k < chunk_len; ++k)
        world::normalize_action(task.constants, ep.steps[t0 + k].action,
                                tr.chunk.data() + static_cast<size_t>(k) * world::kActionDim);
      int t_next = t0 + chunk_len;
      tr.next_obs = t_next < n ? ep.steps[t_next].obs.data : ep.final_obs.data;
      tr.done = i + 1 == n_chunks;
      if (mode == RewardMode::task_specific) {
        bool overlaps = w.reward == 1 && t0 <= w.end && (t0 + chunk_len - 1) >= w.start;
        tr.reward = overlaps ? 1.0 : 0.0;
      } else {
        tr.reward = (tr.done && ep.success) ? 1.0 : 0.0;
      }
      trs.push_back(std::move(tr));
    }
    for (int i = static_cast<int>(trs.size()) - 1; i >= 0; --i)
      trs[i].mc_return =
          trs[i].reward + (i + 1 < static_cast<int>(trs.size()) ? gamma * trs[i + 1].mc_return : 0.0);
    for (auto& tr : trs) ds.transitions.push_back(std::move(tr));
  }
  if (ds.transitions.empty()) throw ConfigError("build_dataset: all episodes shorter than one chunk");
  ds.obs_dim = static_cast<int>(ds.transitions.front().obs.size());
  return ds;
}

void save_dataset(const std::filesystem::path& path, const ElegantDataset& ds) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write dataset: " + path.string());
    json header{{"format", "elegant-dataset-v1"},
                {"k", ds.chunk_len},
                {"gamma", ds.gamma},
                {"reward_mode", reward_mode_name(ds.reward_mode)},
                {"obs_dim", ds.obs_dim},
                {"action_dim", ds.action_dim},
                {"task_ids", ds.task_ids},
                {"constants", ds.constants},
                {"skipped_episodes", ds.skipped_episodes}};
    out << header.dump() << "\n";
    for (const auto& tr : ds.transitions) {
      json j{{"ep", tr.episode}, {"i", tr.index},   {"task", tr.task_id}, {"s", tr.obs},
             {"a", tr.chunk},    {"r", tr.reward},  {"sp", tr.next_obs},  {"done", tr.done},
             {"mc", tr.mc_return}};
      out << j.dump() << "\n";
    }
  }
  std::filesystem::rename(tmp, path);
}

ElegantDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset file: " + path.string());
  json header = json::parse(line);
  if (header.value("format", "") != "elegant-dataset-v1")
    throw ConfigError("unexpected dataset format: " + path.string());
  ElegantDataset ds;
  ds.chunk_len = header.at("k");
  ds.gamma = header.at("gamma");
  ds.reward_mode = reward_mode_from_name(header.at("reward_mode"));
  ds.obs_dim = header.at("obs_dim");
  ds.action_dim = header.at("action_dim");
  ds.task_ids = header.at("task_ids").get<std::vector<std::string>>();
  ds.constants = header.at("constants");
  ds.skipped_episodes = header.value("skipped_episodes", 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Transition tr;
    tr.episode = j.at("ep");
    tr.index = j.at("i");
    tr.task_id = j.at("task");
    tr.obs = j.at("s").get<std::vector<double>>();
    tr.chunk = j.at("a").get<std::vector<double>>();
    tr.reward = j.at("r");
    tr.next_obs = j.at("sp").get<std::vector<double>>();
    tr.done = j.at("done");
    tr.mc_return = j.at("mc");
    ds.transitions.push_back(std::move(tr));
  }
  return ds;
}

// --- episode logs ---------------------------------------------------------------

namespace {

json state_core(const WorldState& s) {
  json j;
  j["time"] = s.time;
  j["gripper"] = s.gripper;
  j["objects"] = s.objects;
  j["held_index"] = s.held_index;
  j["hold_dx"] = s.hold_dx;
  j["hold_dy"] = s.hold_dy;
  return j;
}

}  // namespace

void save_episode(const std::filesystem::path& path, const Episode& ep, const TaskSpec& task) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write episode log: " + path.string());
    json header{{"format", "episode-v1"},
                {"task", ep.task_id},
                {"seed", ep.seed},
                {"constants", task.constants},
                {"initial", ep.initial},
                {"success", ep.success},
                {"elegant", ep.elegant},
                {"success_expr", itcdsl::print_expr(task.success_expr)},
                {"elegance_expr", itcdsl::print_expr(task.elegance_expr)},
                {"task_object", task.task_object}};
    out << header.dump() << "\n";
    for (const auto& st : ep.steps) {
      json j{{"time", st.state.time}, {"action", st.action}, {"state", state_core(st.state)},
             {"events", st.events}};
      out << j.dump() << "\n";
    }
  }
  std::filesystem::rename(tmp, path);
}

LoadedEpisode load_episode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing episode log: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty episode log: " + path.string());
  json header = json::parse(line);
  if (header.value("format", "") != "episode-v1")
    throw ConfigError("unexpected episode log format: " + path.string());
  LoadedEpisode ep;
  ep.task_id = header.at("task");
  ep.seed = header.at("seed");
  ep.constants = header.at("constants");
  ep.initial = header.at("initial");
  ep.success = header.at("success");
  ep.elegant = header.at("elegant");
  ep.success_expr = itcdsl::parse(header.at("success_expr").get<std::string>());
  ep.elegance_expr = itcdsl::parse(header.at("elegance_expr").get<std::string>());
  ep.task_object = header.at("task_object");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("decision")) continue;  // guidance records, not simulation steps
    ep.actions.push_back(j.at("action").get<Action>());
    WorldState s = j.at("state").get<WorldState>();
    s.regions = ep.initial.regions;
    ep.states.push_back(std::move(s));
    ep.events.push_back(j.at("events").get<world::StepEvents>());
  }
  return ep;
}

// --- generation recipe -----------------------------------------------------------

std::vector<DemoProfile> recipe_for_task(const world::TaskSpec& task, int n_episodes) {
  // (profile, weight) rows; targeted profile gets the bulk of the flawed mass.
  std::vector<std::pair<ProfileKind, double>> mix;
  switch (task.dimension) {
    case world::EleganceDimension::sequence_integrity:
      mix = {{ProfileKind::expert, 0.45},
             {ProfileKind::premature_release, 0.30},
             {ProfileKind::hesitant, 0.15},
             {ProfileKind::sloppy_placement, 0.10}};
      break;
    case world::EleganceDimension::pose_accuracy:
      mix = {{ProfileKind::expert, 0.45},
             {ProfileKind::sloppy_placement, 0.35},
             {ProfileKind::hesitant, 0.10},
             {ProfileKind::premature_release, 0.10}};
      break;
    case world::EleganceDimension::pose_alignment:
      mix = {{ProfileKind::expert, 0.45},
             {ProfileKind::misaligned, 0.35},
             {ProfileKind::hesitant, 0.10},
             {ProfileKind::sloppy_placement, 0.10}};
      break;
    case world::EleganceDimension::collision_free:
      if (task.push_task)
        mix = {{ProfileKind::expert, 0.45},
               {ProfileKind::collision_prone, 0.45},
               {ProfileKind::hesitant, 0.10}};
      else
        mix = {{ProfileKind::expert, 0.45},
               {ProfileKind::collision_prone, 0.35},
               {ProfileKind::premature_release, 0.10},
               {ProfileKind::hesitant, 0.10}};
      break;
  }
  // Largest-remainder apportionment keeps the counts deterministic.
  std::vector<int> counts(mix.size(), 0);
  std::vector<std::pair<double, size_t>> rema;
  int assigned = 0;
  for (size_t i = 0; i < mix.size(); ++i) {
    double exact = mix[i].second * n_episodes;
    counts[i] = static_cast<int>(exact);
    assigned += counts[i];
    rema.push_back({exact - counts[i], i});
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < n_episodes; ++i, ++assigned) counts[rema[i % rema.size()].second] += 1;

  std::vector<DemoProfile> out;
  for (size_t i = 0; i < mix.size(); ++i)
    for (int k = 0; k < counts[i]; ++k) out.push_back(default_profile(mix[i].first));
  return out;
}

}  // namespace elegance::demos
