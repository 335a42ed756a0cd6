#pragma once

#include <deque>
#include <span>

#include "elegance/critic.hpp"
#include "elegance/demos.hpp"
#include "elegance/policy.hpp"

namespace elegance::jiti {

struct JitiConfig {
  double threshold = 0.0;  // intervention trigger on the q fluctuation
  int window_k = 5;        // history window; with k=1 the fluctuation is identically 0
  int n_candidates = 8;
};

// Validation applied when configs come from user input; tests may construct
// out-of-range configs (e.g. negative threshold = always intervene) directly.
void validate(const JitiConfig& config);

struct JitiState {
  std::deque<double> history;
  int window_k = 5;
  int64_t steps = 0;
  int64_t interventions = 0;
};

JitiState make_state(const JitiConfig& config);

struct FluctuationResult {
  double mean = 0;
  double delta_q = 0;
};

// Pushes q into the window first, then takes the mean over the updated
// window (so the first observation always has zero fluctuation).
FluctuationResult fluctuation(JitiState& state, double q);

// Lowest index wins ties.
int argmax_index(std::span<const double> values);

enum class GuidanceMode { base_only, full_guidance, jiti };
std::string mode_name(GuidanceMode m);
GuidanceMode mode_from_name(const std::string& s);

struct DecideResult {
  std::vector<double> chunk;
  bool intervened = false;
  double q_default = 0;
  double mean = 0;
  double delta_q = 0;
  int chosen_index = 0;  // 0 = default action, 1..N = candidate index
  int critic_calls = 0;
};

// One guidance decision: evaluate the default action (one critic call); if
// the fluctuation stays within the threshold execute it, otherwise score the
// N fresh candidates and take the argmax (N+1 critic calls total).
DecideResult decide(std::span<const double> obs, const policy::PolicyNet& pol,
                    const critic::CriticNet& critic, JitiState& state, const JitiConfig& config,
                    uint64_t seed);

struct DecisionRecord {
  int decision = 0;
  double q = 0;
  double mean = 0;
  double delta_q = 0;
  bool intervened = false;
  int chosen_index = 0;
};

struct RolloutStats {
  int decisions = 0;
  int interventions = 0;
  int64_t critic_calls = 0;
  std::vector<DecisionRecord> records;
};

struct RolloutResult {
  demos::Episode episode;
  RolloutStats stats;
};

// Executes chunks open-loop for K steps each, re-deciding every K steps up to
// the horizon. base_only never touches the critic; full_guidance scores the N
// candidates at every decision; jiti follows decide(). All three modes draw
// candidates from the same per-decision seed stream, so candidate i is the
// same chunk in every mode.
RolloutResult rollout(const world::TaskSpec& task, GuidanceMode mode, const policy::PolicyNet& pol,
                      const critic::CriticNet* critic, const JitiConfig& config, uint64_t seed);

}  // namespace elegance::jiti
