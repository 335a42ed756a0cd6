#include "elegance/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace elegance::world {

namespace {

double clamp(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }

double dist(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

}  // namespace

std::string region_kind_name(RegionKind k) {
  switch (k) {
    case RegionKind::container: return "container";
    case RegionKind::surface: return "surface";
    case RegionKind::obstacle: return "obstacle";
  }
  return "?";
}

RegionKind region_kind_from_name(const std::string& s) {
  if (s == "container") return RegionKind::container;
  if (s == "surface") return RegionKind::surface;
  if (s == "obstacle") return RegionKind::obstacle;
  throw ConfigError("unknown region kind: " + s);
}

std::string dimension_name(EleganceDimension d) {
  switch (d) {
    case EleganceDimension::sequence_integrity: return "sequence_integrity";
    case EleganceDimension::pose_accuracy: return "pose_accuracy";
    case EleganceDimension::pose_alignment: return "pose_alignment";
    case EleganceDimension::collision_free: return "collision_free";
  }
  return "?";
}

EleganceDimension dimension_from_name(const std::string& s) {
  if (s == "sequence_integrity") return EleganceDimension::sequence_integrity;
  if (s == "pose_accuracy") return EleganceDimension::pose_accuracy;
  if (s == "pose_alignment") return EleganceDimension::pose_alignment;
  if (s == "collision_free") return EleganceDimension::collision_free;
  throw ConfigError("unknown elegance dimension: " + s);
}

const ObjectState* WorldState::find_object(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const Region* WorldState::find_region(const std::string& id) const {
  for (const auto& r : regions)
    if (r.id == id) return &r;
  return nullptr;
}

int observation_dim(const TaskSpec& task) {
  return 3 + 5 * task.effective_max_objects() + 2 * task.effective_max_regions() + task.family_size;
}

WorldState reset(const TaskSpec& task, uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    WorldState s;
    s.time = 0;
    s.gripper = task.layout.gripper_start;
    s.objects = task.layout.objects;
    s.regions = task.layout.regions;
    double j = task.layout.jitter;
    double aj = task.layout.angle_jitter;
    for (auto& o : s.objects) {
      if (j > 0) {
        o.x += rng.uniform(-j, j);
        o.y += rng.uniform(-j, j);
      }
      if (aj > 0) o.angle += rng.uniform(-aj, aj);
    }
    bool feasible = true;
    for (size_t a = 0; a < s.objects.size() && feasible; ++a)
      for (size_t b = a + 1; b < s.objects.size(); ++b) {
        double gap = dist(s.objects[a].x, s.objects[a].y, s.objects[b].x, s.objects[b].y) -
                     s.objects[a].radius - s.objects[b].radius;
        if (gap < task.constants.clearance) {
          feasible = false;
          break;
        }
      }
    if (feasible) return s;
  }
  throw ConfigError("reset: infeasible layout for task " + task.id + " (objects overlap after 100 retries)");
}

std::pair<WorldState, StepEvents> step(const WorldConstants& c, const WorldState& prev, const Action& action) {
  if (!std::isfinite(action.dx) || !std::isfinite(action.dy) || !std::isfinite(action.dangle) ||
      !std::isfinite(action.grip_cmd))
    throw NumericError("step: non-finite action");

  WorldState s = prev;
  StepEvents ev;
  s.time = prev.time + 1;

  double dx = clamp(action.dx, -c.a_max, c.a_max);
  double dy = clamp(action.dy, -c.a_max, c.a_max);
  double dangle = clamp(action.dangle, -c.angle_max, c.angle_max);

  std::vector<std::pair<double, double>> before(s.objects.size());
  for (size_t i = 0; i < s.objects.size(); ++i) before[i] = {s.objects[i].x, s.objects[i].y};

  s.gripper.x += dx;
  s.gripper.y += dy;
  if (s.held_index >= 0) {
    ObjectState& held = s.objects[s.held_index];
    held.x = s.gripper.x + s.hold_dx;
    held.y = s.gripper.y + s.hold_dy;
    held.angle += dangle;
  }

  // Contact model, resolved before grip transitions so a pushing contact
  // never enters the grasp radius. The mover disc is the held object while
  // holding, else the gripper when it was already closed at step entry (an
  // open gripper travels above the workspace). Free objects overlapped by a
  // mover are pushed out along the center line, and a pushed object becomes a
  // mover for the next wave so shoves chain through contact. Obstacle regions
  // only record contact.
  struct Disc {
    std::string id;
    double x, y, r;
    int obj = -1;  // -1 means the gripper
  };
  std::vector<Disc> wave;
  if (s.held_index >= 0) {
    const ObjectState& held = s.objects[s.held_index];
    wave.push_back({held.id, held.x, held.y, held.radius, s.held_index});
  } else if (s.gripper.grip) {
    wave.push_back({"gripper", s.gripper.x, s.gripper.y, c.gripper_radius, -1});
  }
  std::vector<bool> was_mover(s.objects.size(), false);
  if (s.held_index >= 0) was_mover[s.held_index] = true;
  for (int depth = 0; depth < 3 && !wave.empty(); ++depth) {
    std::vector<Disc> next_wave;
    for (const Disc& m : wave) {
      for (size_t i = 0; i < s.objects.size(); ++i) {
        if (was_mover[i] || static_cast<int>(i) == m.obj) continue;
        ObjectState& o = s.objects[i];
        double r_sum = m.r + o.radius;
        double d = dist(m.x, m.y, o.x, o.y);
        if (d < r_sum) {
          double nx = 1.0, ny = 0.0;
          if (d > 1e-12) {
            nx = (o.x - m.x) / d;
            ny = (o.y - m.y) / d;
          }
          o.x = m.x + nx * r_sum;
          o.y = m.y + ny * r_sum;
          ev.collisions.emplace_back(m.id, o.id);
          next_wave.push_back({o.id, o.x, o.y, o.radius, static_cast<int>(i)});
        }
      }
      for (const Region& r : s.regions) {
        if (r.kind != RegionKind::obstacle) continue;
        if (dist(m.x, m.y, r.cx, r.cy) < m.r + r.extent) ev.collisions.emplace_back(m.id, r.id);
      }
    }
    for (const Disc& d : next_wave)
      if (d.obj >= 0) was_mover[d.obj] = true;
    wave = std::move(next_wave);
  }

  // Grip transitions. Closing engages the nearest free object within
  // grasp_radius; opening while holding releases, and a release over a
  // container drops the object onto the container floor (its center).
  if (action.grip_cmd > 0.5) {
    s.gripper.grip = true;
    if (s.held_index < 0) {
      int best = -1;
      double best_d = c.grasp_radius;
      for (size_t i = 0; i < s.objects.size(); ++i) {
        double d = dist(s.gripper.x, s.gripper.y, s.objects[i].x, s.objects[i].y);
        if (d <= best_d) {
          best_d = d;
          best = static_cast<int>(i);
        }
      }
      if (best >= 0) {
        s.held_index = best;
        s.objects[best].held = true;
        s.hold_dx = s.objects[best].x - s.gripper.x;
        s.hold_dy = s.objects[best].y - s.gripper.y;
        ev.grasp_started = true;
        ev.grasped_id = s.objects[best].id;
      }
    }
  } else if (action.grip_cmd < -0.5) {
    s.gripper.grip = false;
    if (s.held_index >= 0) {
      ObjectState& held = s.objects[s.held_index];
      held.held = false;
      ev.released = true;
      ev.released_id = held.id;
      for (const Region& r : s.regions) {
        if (r.kind == RegionKind::container && dist(held.x, held.y, r.cx, r.cy) <= r.extent) {
          held.x = r.cx;
          held.y = r.cy;
          break;
        }
      }
      s.held_index = -1;
      s.hold_dx = s.hold_dy = 0;
    }
  }

  for (size_t i = 0; i < s.objects.size(); ++i) {
    double moved = dist(s.objects[i].x, s.objects[i].y, before[i].first, before[i].second);
    if (moved > 0) ev.displacements[s.objects[i].id] = moved;
  }
  return {std::move(s), std::move(ev)};
}

numerics::Tensor observe(const TaskSpec& task, const WorldState& state) {
  int n_obj = task.effective_max_objects();
  int n_reg = task.effective_max_regions();
  if (static_cast<int>(state.objects.size()) > n_obj || static_cast<int>(state.regions.size()) > n_reg)
    throw ConfigError("observe: state exceeds declared object/region slots for task " + task.id);
  for (const auto& o : state.objects)
    if (!task.layout.objects.empty() &&
        std::none_of(task.layout.objects.begin(), task.layout.objects.end(),
                     [&](const ObjectState& t) { return t.id == o.id; }))
      throw ConfigError("observe: undeclared object " + o.id + " in task " + task.id);

  std::vector<double> v;
  v.reserve(observation_dim(task));
  v.push_back(state.gripper.x);
  v.push_back(state.gripper.y);
  v.push_back(state.gripper.grip ? 1.0 : 0.0);
  for (int i = 0; i < n_obj; ++i) {
    if (i < static_cast<int>(state.objects.size())) {
      const ObjectState& o = state.objects[i];
      v.push_back(o.x);
      v.push_back(o.y);
      v.push_back(std::sin(o.angle));
      v.push_back(std::cos(o.angle));
      v.push_back(o.held ? 1.0 : 0.0);
    } else {
      for (int k = 0; k < 5; ++k) v.push_back(0.0);
    }
  }
  for (int i = 0; i < n_reg; ++i) {
    if (i < static_cast<int>(state.regions.size())) {
      v.push_back(state.regions[i].cx);
      v.push_back(state.regions[i].cy);
    } else {
      v.push_back(0.0);
      v.push_back(0.0);
    }
  }
  for (int i = 0; i < task.family_size; ++i) v.push_back(i == task.family_index ? 1.0 : 0.0);
  return numerics::Tensor::vector(std::move(v));
}

Action denormalize_action(const WorldConstants& c, const double* row) {
  Action a;
  a.dx = row[0] * c.a_max;
  a.dy = row[1] * c.a_max;
  a.dangle = row[2] * c.angle_max;
  a.grip_cmd = row[3];
  return a;
}

void normalize_action(const WorldConstants& c, const Action& a, double* out) {
  out[0] = clamp(a.dx / c.a_max, -1.0, 1.0);
  out[1] = clamp(a.dy / c.a_max, -1.0, 1.0);
  out[2] = clamp(a.dangle / c.angle_max, -1.0, 1.0);
  out[3] = clamp(a.grip_cmd, -1.0, 1.0);
}

// --- task files --------------------------------------------------------------

namespace {

std::vector<std::string> tokenize_line(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

double to_num(const std::string& s, const std::string& ctx) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("task file: bad number '" + s + "' in " + ctx);
  }
}

// Reads the rest of a line after a known prefix (for instructions).
std::string rest_after(const std::string& line, const std::string& key) {
  size_t pos = line.find(key);
  pos += key.size();
  while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
  return line.substr(pos);
}

}  // namespace

TaskSpec load_task_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task file: " + path.string());
  TaskSpec task;
  std::string success_text, elegance_text;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = line;
    size_t hash = stripped.find('#');
    if (hash != std::string::npos) stripped = stripped.substr(0, hash);
    auto toks = tokenize_line(stripped);
    if (toks.empty()) continue;
    const std::string& key = toks[0];
    std::string ctx = path.filename().string() + ":" + std::to_string(line_no);
    auto need = [&](size_t n) {
      if (toks.size() != n + 1)
        throw ConfigError("task file: '" + key + "' expects " + std::to_string(n) + " fields at " + ctx);
    };
    if (key == "task") {
      need(1);
      task.id = toks[1];
    } else if (key == "instruction") {
      task.instruction = rest_after(line, "instruction");
    } else if (key == "dimension") {
      need(1);
      task.dimension = dimension_from_name(toks[1]);
    } else if (key == "horizon") {
      need(1);
      task.horizon = static_cast<int>(to_num(toks[1], ctx));
      if (task.horizon < 1) throw ConfigError("task file: horizon must be >= 1 at " + ctx);
    } else if (key == "a_max") {
      need(1);
      task.constants.a_max = to_num(toks[1], ctx);
    } else if (key == "angle_max") {
      need(1);
      task.constants.angle_max = to_num(toks[1], ctx);
    } else if (key == "grasp_radius") {
      need(1);
      task.constants.grasp_radius = to_num(toks[1], ctx);
    } else if (key == "gripper_radius") {
      need(1);
      task.constants.gripper_radius = to_num(toks[1], ctx);
    } else if (key == "clearance") {
      need(1);
      task.constants.clearance = to_num(toks[1], ctx);
    } else if (key == "jitter") {
      need(1);
      task.layout.jitter = to_num(toks[1], ctx);
    } else if (key == "angle_jitter") {
      need(1);
      task.layout.angle_jitter = to_num(toks[1], ctx);
    } else if (key == "gripper") {
      need(2);
      task.layout.gripper_start.x = to_num(toks[1], ctx);
      task.layout.gripper_start.y = to_num(toks[2], ctx);
    } else if (key == "object") {
      need(5);
      ObjectState o;
      o.id = toks[1];
      o.x = to_num(toks[2], ctx);
      o.y = to_num(toks[3], ctx);
      o.angle = to_num(toks[4], ctx);
      o.radius = to_num(toks[5], ctx);
      task.layout.objects.push_back(o);
    } else if (key == "region") {
      need(5);
      Region r;
      r.id = toks[1];
      r.kind = region_kind_from_name(toks[2]);
      r.cx = to_num(toks[3], ctx);
      r.cy = to_num(toks[4], ctx);
      r.extent = to_num(toks[5], ctx);
      task.layout.regions.push_back(r);
    } else if (key == "task_object") {
      need(1);
      task.task_object = toks[1];
    } else if (key == "target_region") {
      need(1);
      task.target_region = toks[1];
    } else if (key == "push_task") {
      need(1);
      task.push_task = toks[1] == "true" || toks[1] == "1";
    } else if (key == "place_angle") {
      need(1);
      task.place_angle = to_num(toks[1], ctx);
    } else if (key == "waypoint") {
      need(3);
      Waypoint w{to_num(toks[2], ctx), to_num(toks[3], ctx)};
      if (toks[1] == "approach")
        task.approach_waypoints.push_back(w);
      else if (toks[1] == "exit")
        task.exit_waypoints.push_back(w);
      else
        throw ConfigError("task file: waypoint kind must be approach|exit at " + ctx);
    } else if (key == "success") {
      success_text = rest_after(stripped, "success");
    } else if (key == "elegance") {
      elegance_text = rest_after(stripped, "elegance");
    } else {
      throw ConfigError("task file: unknown key '" + key + "' at " + ctx);
    }
  }
  if (task.id.empty()) throw ConfigError("task file missing 'task' id: " + path.string());
  if (success_text.empty() || elegance_text.empty())
    throw ConfigError("task file missing success/elegance expression: " + path.string());
  task.success_expr = itcdsl::parse(success_text);
  task.elegance_expr = itcdsl::parse(elegance_text);

  // Every id referenced by the predicates must be declared.
  auto declared = [&](const std::string& id) {
    for (const auto& o : task.layout.objects)
      if (o.id == id) return true;
    for (const auto& r : task.layout.regions)
      if (r.id == id) return true;
    return false;
  };
  for (const auto& expr : {task.success_expr, task.elegance_expr})
    for (const std::string& id : itcdsl::referenced_ids(expr))
      if (!declared(id))
        throw ConfigError("task " + task.id + ": predicate references undeclared id '" + id + "'");
  if (!task.task_object.empty() && !declared(task.task_object))
    throw ConfigError("task " + task.id + ": task_object is undeclared");
  return task;
}

const TaskSpec& Benchmark::task_by_id(const std::string& id) const {
  for (const auto& t : tasks)
    if (t.id == id) return t;
  throw ConfigError("benchmark has no task with id " + id);
}

std::vector<int> Benchmark::split_indices(const std::string& split) const {
  std::vector<int> out;
  for (size_t i = 0; i < tasks.size(); ++i)
    if (splits[i] == split) out.push_back(static_cast<int>(i));
  return out;
}

Benchmark load_benchmark(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open benchmark manifest: " + manifest.string());
  Benchmark b;
  b.root = manifest.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto toks = tokenize_line(line);
    if (toks.empty()) continue;
    if (toks[0] != "task" || toks.size() < 2 || toks.size() > 3)
      throw ConfigError("benchmark manifest: expected 'task <file> [seen|unseen]' at line " +
                        std::to_string(line_no));
    TaskSpec t = load_task_file(b.root / toks[1]);
    std::string split = toks.size() == 3 ? toks[2] : "";
    if (!split.empty() && split != "seen" && split != "unseen")
      throw ConfigError("benchmark manifest: split must be seen|unseen at line " + std::to_string(line_no));
    b.tasks.push_back(std::move(t));
    b.splits.push_back(split);
  }
  if (b.tasks.empty()) throw ConfigError("benchmark manifest lists no tasks: " + manifest.string());
  b.constants = b.tasks.front().constants;
  for (const auto& t : b.tasks) {
    if (!(t.constants == b.constants))
      throw ConfigError("benchmark constants differ between tasks (" + b.tasks.front().id + " vs " + t.id +
                        ")");
    b.max_objects = std::max(b.max_objects, static_cast<int>(t.layout.objects.size()));
    b.max_regions = std::max(b.max_regions, static_cast<int>(t.layout.regions.size()));
  }
  for (size_t i = 0; i < b.tasks.size(); ++i) {
    b.tasks[i].family_index = static_cast<int>(i);
    b.tasks[i].family_size = static_cast<int>(b.tasks.size());
    b.tasks[i].max_objects = b.max_objects;
    b.tasks[i].max_regions = b.max_regions;
  }
  return b;
}

}  // namespace elegance::world
