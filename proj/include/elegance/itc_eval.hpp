#pragma once

#include <span>
#include <string>

#include "elegance/itcdsl.hpp"
#include "elegance/world.hpp"

namespace elegance::itcdsl {

// Trajectory view for predicate evaluation: post-step states plus the events
// that produced them, and the initial state for PositionUnchanged baselines.
struct EvalContext {
  const world::WorldState* initial = nullptr;
  std::span<const world::WorldState> states;
  std::span<const world::StepEvents> events;
  std::string task_object;  // binds AtRelease and IsOnBottomOf release lookups
};

// Atom semantics (defaults evaluate at the final step):
//   In/On            object center within the region disc
//   IsGrasping       object held at the evaluated step
//   IsPreciselyOn    distance(object, region center) <= tol
//   IsOrientationAligned  wrapped |angle - target| <= tol
//   PositionUnchanged     max displacement from the initial pose <= tol
//                         (whole-trajectory, independent of the step)
//   IsOnBottomOf     final step: inside container, not held, and the task
//                    object's last release happened inside the container
// Temporal: Always/Eventually quantify the body over every step; AtRelease
// evaluates the body at the first release of the task object (false if the
// object is never released).
bool evaluate(const Expr& expr, const EvalContext& ctx);

double wrap_angle(double a);

}  // namespace elegance::itcdsl
