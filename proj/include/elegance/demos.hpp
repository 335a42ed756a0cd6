#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "elegance/itc_eval.hpp"
#include "elegance/tensor.hpp"
#include "elegance/world.hpp"

namespace elegance::demos {

enum class ProfileKind {
  expert,
  premature_release,
  sloppy_placement,
  misaligned,
  collision_prone,
  hesitant,
};

std::string profile_name(ProfileKind k);
ProfileKind profile_from_name(const std::string& s);
std::vector<ProfileKind> all_profiles();

struct DemoProfile {
  ProfileKind kind = ProfileKind::expert;
  double noise_scale = 0.004;  // std of per-step translation noise, world units
  // premature_release: release this far outside the target rim, then shove
  // the object home.
  double early_margin_lo = 0.05, early_margin_hi = 0.14;
  // sloppy_placement: endpoint offset as multiples of the task's precision
  // tolerance.
  double sloppy_lo = 1.8, sloppy_hi = 3.5;
  // misaligned: angle error as multiples of the task's angle tolerance.
  double misalign_lo = 1.8, misalign_hi = 3.5;
  int pause_steps = 5;
};

DemoProfile default_profile(ProfileKind kind);

struct EpisodeStep {
  numerics::Tensor obs;       // observation before the action
  world::Action action;       // emitted action (pre-clamp; the sim clamps)
  world::WorldState state;    // state after the action
  world::StepEvents events;
};

struct Episode {
  std::string task_id;
  uint64_t seed = 0;
  world::WorldState initial;
  std::vector<EpisodeStep> steps;
  numerics::Tensor final_obs;
  bool success = false;
  bool elegant = false;  // success AND elegance constraints

  std::string id() const { return task_id + "/" + std::to_string(seed); }
};

itcdsl::EvalContext eval_context(const Episode& ep, const world::TaskSpec& task,
                                 std::vector<world::WorldState>& states_buf,
                                 std::vector<world::StepEvents>& events_buf);

// Deterministic scripted demonstrator: waypoint controller running
// reach -> grasp -> transport -> place (or staged pushing for push tasks),
// with profile-specific corruption injected.
Episode generate_demo(const world::TaskSpec& task, const DemoProfile& profile, uint64_t seed);

struct RewardWindow {
  int start = 0;
  int end = 0;
  int reward = 0;
};

inline constexpr int kWindowSize = 25;

// Exactly one window per episode, centered on the critical moment (release
// for place tasks, closest-approach for collision tasks, final-approach
// start for precision tasks) and clipped to episode bounds.
std::vector<RewardWindow> annotate(const Episode& episode, const world::TaskSpec& task,
                                   int window = kWindowSize);

enum class RewardMode { task_specific, binary_terminal };
std::string reward_mode_name(RewardMode m);
RewardMode reward_mode_from_name(const std::string& s);

struct Transition {
  std::vector<double> obs;
  std::vector<double> chunk;  // K x action_dim, normalized to [-1, 1]
  double reward = 0;
  std::vector<double> next_obs;
  bool done = false;
  double mc_return = 0;
  std::string episode;  // source episode id
  int index = 0;        // transition index within the episode
  std::string task_id;
};

struct ElegantDataset {
  int chunk_len = 10;
  double gamma = 0.98;
  RewardMode reward_mode = RewardMode::task_specific;
  int obs_dim = 0;
  int action_dim = world::kActionDim;
  std::vector<std::string> task_ids;
  world::WorldConstants constants;
  std::vector<Transition> transitions;
  int skipped_episodes = 0;  // episodes shorter than one chunk
};

ElegantDataset build_dataset(std::span<const Episode> episodes, const std::vector<world::TaskSpec>& tasks,
                             int chunk_len, RewardMode mode, double gamma);

void save_dataset(const std::filesystem::path& path, const ElegantDataset& ds);
ElegantDataset load_dataset(const std::filesystem::path& path);

// Episode logs: JSON-lines, one header then one record per step.
void save_episode(const std::filesystem::path& path, const Episode& ep, const world::TaskSpec& task);

struct LoadedEpisode {
  std::string task_id;
  uint64_t seed = 0;
  world::WorldConstants constants;
  world::WorldState initial;
  std::vector<world::Action> actions;
  std::vector<world::WorldState> states;
  std::vector<world::StepEvents> events;
  bool success = false;
  bool elegant = false;
  itcdsl::Expr success_expr, elegance_expr;
  std::string task_object;
};

LoadedEpisode load_episode(const std::filesystem::path& path);

// Default mixed-quality generation recipe: per task, a deterministic profile
// mix of roughly 45% expert and 55% flawed, weighted toward the profile that
// targets the task's elegance dimension.
std::vector<DemoProfile> recipe_for_task(const world::TaskSpec& task, int n_episodes);

}  // namespace elegance::demos
