#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "elegance/jiti.hpp"

namespace elegance::eval {

struct EpisodeOutcome {
  std::string task_id;
  uint64_t seed = 0;
  bool success = false;
  bool elegant = false;  // implies success
  int interventions = 0;
  int64_t critic_calls = 0;
  int length = 0;
  int decisions = 0;
};

// 100 * (#elegant / #outcomes)
double esr(std::span<const EpisodeOutcome> outcomes);

struct CellStats {
  std::string task_id;
  jiti::GuidanceMode mode = jiti::GuidanceMode::base_only;
  std::vector<EpisodeOutcome> outcomes;
  double esr_pct = 0;
  double success_pct = 0;
  double mean_interventions = 0;
  double mean_critic_calls = 0;
};

struct ExperimentReport {
  std::vector<CellStats> cells;
  std::map<std::string, std::string> config;  // resolved semantic settings
  std::string fingerprint;                    // content hash of config + artifacts

  double average_esr(jiti::GuidanceMode mode, const std::vector<std::string>* task_filter = nullptr) const;
  double average_interventions(jiti::GuidanceMode mode,
                               const std::vector<std::string>* task_filter = nullptr) const;
};

// Rollout seeds depend on (experiment seed, task, rollout index) only, never
// on the mode, so every A-vs-B comparison is paired on identical initial
// states and candidate streams.
uint64_t rollout_seed(uint64_t experiment_seed, const std::string& task_id, int rollout);

// 80th-percentile (by default) fluctuation over base-policy calibration
// rollouts; the concrete value this resolves to is recorded in reports.
double calibrate_threshold(const world::Benchmark& bench, const std::vector<int>& task_indices,
                           const policy::PolicyNet& pol, const critic::CriticNet& critic,
                           const jiti::JitiConfig& config, int rollouts_per_task, double percentile,
                           uint64_t seed, ExecMode mode = ExecMode::parallel);

struct ExperimentSpec {
  std::vector<jiti::GuidanceMode> modes;
  std::vector<int> task_indices;  // empty = all tasks
  int n_rollouts = 50;
  uint64_t seed = 0;
  jiti::JitiConfig jiti_config;
};

ExperimentReport run_experiment(const world::Benchmark& bench, const policy::PolicyNet& pol,
                                const critic::CriticNet* critic, const ExperimentSpec& spec,
                                ExecMode mode = ExecMode::parallel);

// Paired reward-formulation ablation: same policy, seeds and threshold in
// both arms; the two critics must differ in reward_mode and nothing else
// (checked against their checkpoint metadata).
struct AblationReport {
  ExperimentReport arm_task_specific;
  ExperimentReport arm_binary;
};

AblationReport ablate_reward(const world::Benchmark& bench, const policy::PolicyNet& pol,
                             const critic::CriticNet& critic_task_specific,
                             const std::map<std::string, std::string>& meta_task_specific,
                             const critic::CriticNet& critic_binary,
                             const std::map<std::string, std::string>& meta_binary,
                             const ExperimentSpec& spec, ExecMode mode = ExecMode::parallel);

// Seen/unseen generalization: the critic must have trained only on seen-task
// episodes (its metadata lists the training task ids; an unseen id there is
// refused as leakage).
struct GeneralizationReport {
  ExperimentReport seen;
  ExperimentReport unseen;
};

GeneralizationReport generalization_split(const world::Benchmark& bench, const policy::PolicyNet& pol,
                                          const critic::CriticNet& critic,
                                          const std::map<std::string, std::string>& critic_meta,
                                          const ExperimentSpec& spec, ExecMode mode = ExecMode::parallel);

// CSV (one row per task x mode), JSON (fingerprint + per-episode outcomes),
// and per-mode (x, y) plot series. All writes are atomic and byte-stable.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& stem = "report");

}  // namespace elegance::eval
