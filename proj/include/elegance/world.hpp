#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "elegance/common.hpp"
#include "elegance/itcdsl.hpp"
#include "elegance/tensor.hpp"

namespace elegance::world {

enum class RegionKind { container, surface, obstacle };
enum class EleganceDimension { sequence_integrity, pose_accuracy, pose_alignment, collision_free };

std::string region_kind_name(RegionKind k);
RegionKind region_kind_from_name(const std::string& s);
std::string dimension_name(EleganceDimension d);
EleganceDimension dimension_from_name(const std::string& s);

struct Region {
  std::string id;
  RegionKind kind = RegionKind::surface;
  double cx = 0, cy = 0;
  double extent = 0.1;  // disc radius
  bool operator==(const Region&) const = default;
};

struct ObjectState {
  std::string id;
  double x = 0, y = 0;
  double angle = 0;
  double radius = 0.05;
  bool held = false;
  bool operator==(const ObjectState&) const = default;
};

struct GripperState {
  double x = 0, y = 0;
  bool grip = false;
  bool operator==(const GripperState&) const = default;
};

struct WorldState {
  int time = 0;
  GripperState gripper;
  std::vector<ObjectState> objects;
  std::vector<Region> regions;
  int held_index = -1;
  double hold_dx = 0, hold_dy = 0;  // object pose minus gripper pose, fixed at grasp

  const ObjectState* find_object(const std::string& id) const;
  const Region* find_region(const std::string& id) const;
  bool operator==(const WorldState&) const = default;
};

// Per-step deltas in world units; clamped before integration. grip_cmd in
// [-1, 1]: > 0.5 closes, < -0.5 opens, otherwise hold.
struct Action {
  double dx = 0, dy = 0;
  double dangle = 0;
  double grip_cmd = 0;
  bool operator==(const Action&) const = default;
};

struct StepEvents {
  bool grasp_started = false;
  bool released = false;
  std::string grasped_id, released_id;
  std::vector<std::pair<std::string, std::string>> collisions;  // (mover, other)
  std::map<std::string, double> displacements;                  // nonzero object moves this step
  bool operator==(const StepEvents&) const = default;
};

// Benchmark-wide constants; stored in every task file header and required to
// agree across a benchmark.
struct WorldConstants {
  double a_max = 0.05;
  double angle_max = 0.25;
  double grasp_radius = 0.07;
  double gripper_radius = 0.045;
  double clearance = 0.02;
  bool operator==(const WorldConstants&) const = default;
};

inline constexpr int kActionDim = 4;

struct TaskLayout {
  GripperState gripper_start;
  std::vector<ObjectState> objects;
  std::vector<Region> regions;
  double jitter = 0.0;        // uniform +-jitter on object x/y per seed
  double angle_jitter = 0.0;  // uniform +-jitter on object angles per seed
};

struct Waypoint {
  double x = 0, y = 0;
};

struct TaskSpec {
  std::string id;
  std::string instruction;
  EleganceDimension dimension = EleganceDimension::sequence_integrity;
  int horizon = 120;
  WorldConstants constants;
  TaskLayout layout;
  itcdsl::Expr success_expr;
  itcdsl::Expr elegance_expr;

  // Controller hints consumed by the scripted demonstrators.
  std::string task_object;
  std::string target_region;
  bool push_task = false;
  std::optional<double> place_angle;           // desired object angle at placement
  std::vector<Waypoint> approach_waypoints;    // detours on the way to the object
  std::vector<Waypoint> exit_waypoints;        // detours from object to target

  // Observation-family info, filled by the benchmark loader.
  int family_index = 0;
  int family_size = 1;
  int max_objects = -1;
  int max_regions = -1;

  int effective_max_objects() const {
    return max_objects > 0 ? max_objects : static_cast<int>(layout.objects.size());
  }
  int effective_max_regions() const {
    return max_regions > 0 ? max_regions : static_cast<int>(layout.regions.size());
  }
};

int observation_dim(const TaskSpec& task);

WorldState reset(const TaskSpec& task, uint64_t seed);

std::pair<WorldState, StepEvents> step(const WorldConstants& constants, const WorldState& state,
                                       const Action& action);

numerics::Tensor observe(const TaskSpec& task, const WorldState& state);

// Normalized action space: every component in [-1, 1], scaled by the
// benchmark constants on the way into the simulator.
Action denormalize_action(const WorldConstants& c, const double* chunk_row);
void normalize_action(const WorldConstants& c, const Action& a, double* out_row);

// --- task files -------------------------------------------------------------

TaskSpec load_task_file(const std::filesystem::path& path);

struct Benchmark {
  std::filesystem::path root;
  std::vector<TaskSpec> tasks;
  std::vector<std::string> splits;  // per task: "", "seen", or "unseen"
  WorldConstants constants;
  int max_objects = 0;
  int max_regions = 0;

  const TaskSpec& task_by_id(const std::string& id) const;
  std::vector<int> split_indices(const std::string& split) const;
};

Benchmark load_benchmark(const std::filesystem::path& manifest);

}  // namespace elegance::world
