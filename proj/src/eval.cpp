#include "elegance/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace elegance::eval {

using jiti::GuidanceMode;
using nlohmann::json;

double esr(std::span<const EpisodeOutcome> outcomes) {
  if (outcomes.empty()) throw ConfigError("esr: empty outcome list");
  int elegant = 0;
  for (const auto& o : outcomes) {
    if (o.elegant && !o.success) throw VerifyError("outcome marked elegant but not successful");
    elegant += o.elegant ? 1 : 0;
  }
  return 100.0 * elegant / static_cast<double>(outcomes.size());
}

uint64_t rollout_seed(uint64_t experiment_seed, const std::string& task_id, int rollout) {
  return derive_seed(derive_seed(experiment_seed, task_id), static_cast<uint64_t>(rollout));
}

double ExperimentReport::average_esr(GuidanceMode mode, const std::vector<std::string>* task_filter) const {
  double sum = 0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.mode != mode) continue;
    if (task_filter &&
        std::find(task_filter->begin(), task_filter->end(), c.task_id) == task_filter->end())
      continue;
    sum += c.esr_pct;
    ++n;
  }
  if (n == 0) throw ConfigError("average_esr: no cells for mode " + jiti::mode_name(mode));
  return sum / n;
}

double ExperimentReport::average_interventions(GuidanceMode mode,
                                               const std::vector<std::string>* task_filter) const {
  double sum = 0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.mode != mode) continue;
    if (task_filter &&
        std::find(task_filter->begin(), task_filter->end(), c.task_id) == task_filter->end())
      continue;
    sum += c.mean_interventions;
    ++n;
  }
  if (n == 0) throw ConfigError("average_interventions: no cells for mode " + jiti::mode_name(mode));
  return sum / n;
}

double calibrate_threshold(const world::Benchmark& bench, const std::vector<int>& task_indices,
                           const policy::PolicyNet& pol, const critic::CriticNet& critic,
                           const jiti::JitiConfig& config, int rollouts_per_task, double percentile,
                           uint64_t seed, ExecMode mode) {
  // Base-policy rollouts with the fluctuation tracked but never acted on.
  std::vector<int> tasks = task_indices;
  if (tasks.empty())
    for (size_t i = 0; i < bench.tasks.size(); ++i) tasks.push_back(static_cast<int>(i));
  int total = static_cast<int>(tasks.size()) * rollouts_per_task;
  std::vector<std::vector<double>> deltas(total);
  parallel_for(total, mode, [&](int idx) {
    const world::TaskSpec& task = bench.tasks[tasks[idx / rollouts_per_task]];
    int r = idx % rollouts_per_task;
    uint64_t rseed = rollout_seed(derive_seed(seed, "calibrate"), task.id, r);
    auto res = jiti::rollout(task, GuidanceMode::base_only, pol, nullptr, config, rseed);
    jiti::JitiState js = jiti::make_state(config);
    size_t k = static_cast<size_t>(pol.chunk_len);
    for (size_t t = 0; t < res.episode.steps.size(); t += k) {
      const numerics::Tensor& obs = res.episode.steps[t].obs;  // observation before decision t/k
      uint64_t dseed = derive_seed(derive_seed(rseed, "decide"), static_cast<uint64_t>(t / k));
      auto chunk = policy::sample_action(pol, obs.data, derive_seed(dseed, uint64_t{0}));
      double q = critic::q_value(critic, obs.data, chunk);
      deltas[idx].push_back(jiti::fluctuation(js, q).delta_q);
    }
  });
  std::vector<double> all;
  for (const auto& d : deltas) all.insert(all.end(), d.begin(), d.end());
  if (all.empty()) throw ConfigError("calibrate_threshold: no fluctuation samples");
  std::sort(all.begin(), all.end());
  // nearest-rank percentile
  int rank = static_cast<int>(std::ceil(percentile * all.size()));
  rank = std::clamp(rank, 1, static_cast<int>(all.size()));
  return all[rank - 1];
}

ExperimentReport run_experiment(const world::Benchmark& bench, const policy::PolicyNet& pol,
                                const critic::CriticNet* critic, const ExperimentSpec& spec,
                                ExecMode mode) {
  if (spec.modes.empty()) throw ConfigError("run_experiment: no modes requested");
  for (GuidanceMode m : spec.modes)
    if (m != GuidanceMode::base_only && critic == nullptr)
      throw ConfigError("run_experiment: mode " + jiti::mode_name(m) + " needs a critic checkpoint");
  std::vector<int> tasks = spec.task_indices;
  if (tasks.empty())
    for (size_t i = 0; i < bench.tasks.size(); ++i) tasks.push_back(static_cast<int>(i));

  ExperimentReport report;
  for (int ti : tasks) {
    const world::TaskSpec& task = bench.tasks[ti];
    for (GuidanceMode m : spec.modes) {
      CellStats cell;
      cell.task_id = task.id;
      cell.mode = m;
      cell.outcomes.resize(spec.n_rollouts);
      parallel_for(spec.n_rollouts, mode, [&](int r) {
        uint64_t rseed = rollout_seed(spec.seed, task.id, r);
        auto res = jiti::rollout(task, m, pol, critic, spec.jiti_config, rseed);
        EpisodeOutcome& o = cell.outcomes[r];
        o.task_id = task.id;
        o.seed = rseed;
        o.success = res.episode.success;
        o.elegant = res.episode.elegant;
        o.interventions = res.stats.interventions;
        o.critic_calls = res.stats.critic_calls;
        o.length = static_cast<int>(res.episode.steps.size());
        o.decisions = res.stats.decisions;
      });
      cell.esr_pct = esr(cell.outcomes);
      int succ = 0;
      double iv = 0, cc = 0;
      for (const auto& o : cell.outcomes) {
        succ += o.success ? 1 : 0;
        iv += o.interventions;
        cc += static_cast<double>(o.critic_calls);
      }
      cell.success_pct = 100.0 * succ / spec.n_rollouts;
      cell.mean_interventions = iv / spec.n_rollouts;
      cell.mean_critic_calls = cc / spec.n_rollouts;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

AblationReport ablate_reward(const world::Benchmark& bench, const policy::PolicyNet& pol,
                             const critic::CriticNet& critic_task_specific,
                             const std::map<std::string, std::string>& meta_task_specific,
                             const critic::CriticNet& critic_binary,
                             const std::map<std::string, std::string>& meta_binary,
                             const ExperimentSpec& spec, ExecMode mode) {
  if (meta_task_specific.count("reward_mode") == 0 || meta_binary.count("reward_mode") == 0)
    throw ConfigError("ablate_reward: critic metadata missing reward_mode");
  if (meta_task_specific.at("reward_mode") != "task_specific" ||
      meta_binary.at("reward_mode") != "binary_terminal")
    throw ConfigError("ablate_reward: arms must be task_specific vs binary_terminal critics");
  auto stripped = [](const std::map<std::string, std::string>& m) {
    auto copy = m;
    copy.erase("reward_mode");
    copy.erase("dataset");  // dataset paths legitimately differ by reward mode
    return copy;
  };
  if (stripped(meta_task_specific) != stripped(meta_binary))
    throw ConfigError("ablate_reward: arm configs differ in more than reward_mode");
  AblationReport out;
  out.arm_task_specific = run_experiment(bench, pol, &critic_task_specific, spec, mode);
  out.arm_binary = run_experiment(bench, pol, &critic_binary, spec, mode);
  return out;
}

GeneralizationReport generalization_split(const world::Benchmark& bench, const policy::PolicyNet& pol,
                                          const critic::CriticNet& critic,
                                          const std::map<std::string, std::string>& critic_meta,
                                          const ExperimentSpec& spec, ExecMode mode) {
  std::vector<int> seen = bench.split_indices("seen");
  std::vector<int> unseen = bench.split_indices("unseen");
  if (seen.empty() || unseen.empty())
    throw ConfigError("generalization_split: benchmark manifest lacks seen/unseen splits");
  auto it = critic_meta.find("train_task_ids");
  if (it == critic_meta.end())
    throw ConfigError("generalization_split: critic metadata lacks train_task_ids");
  for (int ui : unseen) {
    const std::string& id = bench.tasks[ui].id;
    if (it->second.find(id) != std::string::npos)
      throw ConfigError("generalization_split: leakage, unseen task " + id +
                        " appears in the critic's training set");
  }
  ExperimentSpec seen_spec = spec;
  seen_spec.task_indices = seen;
  ExperimentSpec unseen_spec = spec;
  unseen_spec.task_indices = unseen;
  GeneralizationReport out;
  out.seen = run_experiment(bench, pol, &critic, seen_spec, mode);
  out.unseen = run_experiment(bench, pol, &critic, unseen_spec, mode);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_report(const ExperimentReport& report, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);

  std::string csv = "task,mode,n,esr,success,mean_interventions,mean_critic_calls\n";
  for (const auto& c : report.cells) {
    csv += c.task_id + "," + jiti::mode_name(c.mode) + "," + std::to_string(c.outcomes.size()) + "," +
           fmt(c.esr_pct) + "," + fmt(c.success_pct) + "," + fmt(c.mean_interventions) + "," +
           fmt(c.mean_critic_calls) + "\n";
  }
  atomic_write(dir / (stem + ".csv"), csv);

  json doc;
  doc["fingerprint"] = report.fingerprint;
  doc["config"] = report.config;
  json cells = json::array();
  for (const auto& c : report.cells) {
    json jc;
    jc["task"] = c.task_id;
    jc["mode"] = jiti::mode_name(c.mode);
    jc["esr"] = c.esr_pct;
    jc["success"] = c.success_pct;
    jc["mean_interventions"] = c.mean_interventions;
    jc["mean_critic_calls"] = c.mean_critic_calls;
    json eps = json::array();
    for (const auto& o : c.outcomes) {
      eps.push_back(json{{"seed", o.seed},
                         {"success", o.success},
                         {"elegant", o.elegant},
                         {"interventions", o.interventions},
                         {"critic_calls", o.critic_calls},
                         {"length", o.length},
                         {"decisions", o.decisions}});
    }
    jc["episodes"] = std::move(eps);
    cells.push_back(std::move(jc));
  }
  doc["cells"] = std::move(cells);
  atomic_write(dir / (stem + ".json"), doc.dump(2) + "\n");

  // Plot series: x = task index within this report, y = value.
  std::vector<GuidanceMode> modes;
  for (const auto& c : report.cells)
    if (std::find(modes.begin(), modes.end(), c.mode) == modes.end()) modes.push_back(c.mode);
  std::filesystem::create_directories(dir / "plots");
  for (GuidanceMode m : modes) {
    std::string esr_csv = "x,y\n", iv_csv = "x,y\n";
    int x = 0;
    for (const auto& c : report.cells) {
      if (c.mode != m) continue;
      esr_csv += std::to_string(x) + "," + fmt(c.esr_pct) + "\n";
      iv_csv += std::to_string(x) + "," + fmt(c.mean_interventions) + "\n";
      ++x;
    }
    atomic_write(dir / "plots" / (stem + "_esr_" + jiti::mode_name(m) + ".csv"), esr_csv);
    atomic_write(dir / "plots" / (stem + "_interventions_" + jiti::mode_name(m) + ".csv"), iv_csv);
  }
}

}  // namespace elegance::eval
