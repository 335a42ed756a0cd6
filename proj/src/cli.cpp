#include "elegance/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "elegance/eval.hpp"
#include "elegance/world_json.hpp"

namespace elegance::cli {

using nlohmann::json;

namespace {

world::Benchmark load_bench(const RunConfig& cfg) {
  if (cfg.get("benchmark").empty()) throw ConfigError("missing required config key: benchmark");
  return world::load_benchmark(cfg.get("benchmark"));
}

ExecMode exec_mode(const RunConfig& cfg) {
  int threads = cfg.get_int("threads");
  set_thread_count(threads);
  return threads == 1 ? ExecMode::serial : ExecMode::parallel;
}

void append_decision_records(const std::filesystem::path& path, const jiti::RolloutStats& stats) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  for (const auto& r : stats.records) {
    json j{{"decision", r.decision}, {"q", r.q},
           {"mean", r.mean},         {"delta_q", r.delta_q},
           {"intervened", r.intervened}, {"chosen_index", r.chosen_index}};
    out << j.dump() << "\n";
  }
}

double resolve_threshold(const RunConfig& cfg, const world::Benchmark& bench,
                         const std::vector<int>& calib_tasks, const policy::PolicyNet& pol,
                         const critic::CriticNet& critic, const jiti::JitiConfig& jcfg, ExecMode mode,
                         std::string* how) {
  const std::string& spec = cfg.get("tau_jiti");
  if (spec.rfind("auto:p", 0) == 0) {
    double pct = std::stod(spec.substr(6)) / 100.0;
    if (!(pct > 0.0 && pct <= 1.0)) throw ConfigError("tau_jiti percentile out of range: " + spec);
    double tau = eval::calibrate_threshold(bench, calib_tasks, pol, critic, jcfg,
                                           cfg.get_int("calib_rollouts"), pct, cfg.get_seed(), mode);
    if (how) *how = spec;
    return tau;
  }
  try {
    size_t used;
    double v = std::stod(spec, &used);
    if (used != spec.size()) throw std::invalid_argument(spec);
    if (v < 0) throw ConfigError("tau_jiti must be >= 0");
    if (how) *how = "explicit";
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("tau_jiti must be a number or auto:pNN, got '" + spec + "'");
  }
}

jiti::JitiConfig jiti_config_of(const RunConfig& cfg) {
  jiti::JitiConfig j;
  j.window_k = cfg.get_int("window_k");
  j.n_candidates = cfg.get_int("n_candidates");
  j.threshold = 0.0;  // resolved separately
  if (j.window_k < 2) throw ConfigError("window_k must be >= 2");
  if (j.n_candidates < 2) throw ConfigError("n_candidates must be >= 2");
  return j;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
  ExecMode mode = exec_mode(cfg);
  world::Benchmark bench = load_bench(cfg);
  auto out = cfg.out_dir();
  std::filesystem::create_directories(out);
  cfg.write_resolved(out);

  int per_task = cfg.get_int("episodes_per_task");
  int k = cfg.get_int("k_chunk");
  double gamma = cfg.get_double("gamma");
  uint64_t root = derive_seed(cfg.get_seed(), "gen-data");

  std::vector<demos::Episode> episodes;
  json task_stats = json::array();
  for (const auto& task : bench.tasks) {
    auto recipe = demos::recipe_for_task(task, per_task);
    std::vector<demos::Episode> eps(recipe.size());
    uint64_t task_root = derive_seed(root, task.id);
    parallel_for(static_cast<int>(recipe.size()), mode, [&](int i) {
      eps[i] = demos::generate_demo(task, recipe[i], derive_seed(task_root, static_cast<uint64_t>(i)));
    });
    std::filesystem::path ep_dir = out / "episodes" / task.id;
    std::filesystem::create_directories(ep_dir);
    int elegant = 0, success = 0;
    json profiles = json::object();
    for (size_t i = 0; i < eps.size(); ++i) {
      demos::save_episode(ep_dir / (std::to_string(i) + ".jsonl"), eps[i], task);
      elegant += eps[i].elegant ? 1 : 0;
      success += eps[i].success ? 1 : 0;
      std::string pname = demos::profile_name(recipe[i].kind);
      profiles[pname] = profiles.value(pname, 0) + 1;
    }
    task_stats.push_back(json{{"task", task.id},
                              {"episodes", eps.size()},
                              {"success", success},
                              {"elegant", elegant},
                              {"profiles", profiles}});
    for (auto& e : eps) episodes.push_back(std::move(e));
  }

  const std::string& mode_key = cfg.get("reward_mode");
  std::vector<demos::RewardMode> modes;
  if (mode_key == "both")
    modes = {demos::RewardMode::task_specific, demos::RewardMode::binary_terminal};
  else
    modes = {demos::reward_mode_from_name(mode_key)};
  json dataset_files = json::array();
  for (demos::RewardMode m : modes) {
    demos::ElegantDataset ds = demos::build_dataset(episodes, bench.tasks, k, m, gamma);
    std::string name = "dataset_" + demos::reward_mode_name(m) + ".jsonl";
    demos::save_dataset(out / name, ds);
    dataset_files.push_back(name);
  }

  int elegant_total = 0;
  for (const auto& e : episodes) elegant_total += e.elegant ? 1 : 0;
  json manifest{{"format", "gen-data-manifest-v1"},
                {"benchmark", cfg.get("benchmark")},
                {"tasks", task_stats},
                {"n_tasks", bench.tasks.size()},
                {"episodes_per_task", per_task},
                {"n_episodes", episodes.size()},
                {"elegant_episodes", elegant_total},
                {"elegant_fraction", static_cast<double>(elegant_total) / episodes.size()},
                {"k", k},
                {"gamma", gamma},
                {"datasets", dataset_files},
                {"seed", cfg.get_seed()}};
  std::ofstream mf(out / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << "\n";
  std::cout << "gen-data: " << episodes.size() << " episodes across " << bench.tasks.size()
            << " tasks, elegant fraction "
            << static_cast<double>(elegant_total) / static_cast<double>(episodes.size()) << "\n";
}

void cmd_train_policy(const RunConfig& cfg) {
  ExecMode mode = exec_mode(cfg);
  if (cfg.get("dataset").empty()) throw ConfigError("missing required config key: dataset");
  demos::ElegantDataset ds = demos::load_dataset(cfg.get("dataset"));
  auto out = cfg.out_dir();
  std::filesystem::create_directories(out);
  cfg.write_resolved(out);

  policy::FlowConfig fc;
  fc.euler_steps = cfg.get_int("euler_steps");
  fc.train_steps = cfg.get_int("policy_steps");
  fc.batch = cfg.get_int("policy_batch");
  fc.lr = cfg.get_double("policy_lr");
  fc.weight_decay = cfg.get_double("weight_decay");
  fc.hidden = parse_hidden(cfg.get("policy_hidden"));
  std::vector<policy::TrainLogRow> log;
  policy::PolicyNet pol = policy::train_policy(ds, fc, cfg.get_seed(), &log, mode);
  policy::save_policy(out / "policy.json", pol);
  std::ofstream lf(out / "policy_train_log.csv", std::ios::binary);
  lf << "step,loss\n";
  int interval = cfg.get_int("log_interval");
  for (const auto& row : log)
    if (row.step % interval == 0) lf << row.step << "," << row.loss << "\n";
  std::cout << "train-policy: " << fc.train_steps << " steps, final loss "
            << (log.empty() ? 0.0 : log.back().loss) << "\n";
}

void cmd_train_critic(const RunConfig& cfg) {
  ExecMode mode = exec_mode(cfg);
  if (cfg.get("dataset").empty()) throw ConfigError("missing required config key: dataset");
  if (cfg.get("policy").empty()) throw ConfigError("missing required config key: policy");
  demos::ElegantDataset ds = demos::load_dataset(cfg.get("dataset"));
  policy::PolicyNet pol = policy::load_policy(cfg.get("policy"));
  auto out = cfg.out_dir();
  std::filesystem::create_directories(out);
  cfg.write_resolved(out);

  // Task filter: all tasks, the benchmark's seen split, or an explicit list.
  std::vector<std::string> train_ids = ds.task_ids;
  const std::string& filter = cfg.get("train_tasks");
  if (filter == "seen") {
    world::Benchmark bench = load_bench(cfg);
    train_ids.clear();
    for (int i : bench.split_indices("seen")) train_ids.push_back(bench.tasks[i].id);
    if (train_ids.empty()) throw ConfigError("train_tasks=seen but the benchmark has no seen split");
  } else if (filter != "all") {
    train_ids = split_list(filter);
  }
  demos::ElegantDataset filtered = ds;
  if (train_ids != ds.task_ids) {
    filtered.transitions.clear();
    for (const auto& tr : ds.transitions)
      if (std::find(train_ids.begin(), train_ids.end(), tr.task_id) != train_ids.end())
        filtered.transitions.push_back(tr);
    filtered.task_ids = train_ids;
    if (filtered.transitions.empty()) throw ConfigError("train_tasks filter matches no transitions");
  }

  critic::CalQLConfig cc;
  cc.gamma = cfg.get_double("gamma");
  cc.lambda_cal = cfg.get_double("lambda_cal");
  cc.rho = cfg.get_double("rho");
  cc.m_policy_samples = cfg.get_int("m_policy_samples");
  cc.batch = cfg.get_int("critic_batch");
  cc.train_steps = cfg.get_int("critic_steps");
  cc.lr = cfg.get_double("critic_lr");
  cc.weight_decay = cfg.get_double("weight_decay");
  cc.hidden = parse_hidden(cfg.get("critic_hidden"));
  critic::TrainedCritic trained = critic::train_critic(filtered, pol, cc, cfg.get_seed(), mode);

  std::vector<std::string> sorted_ids = train_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  std::map<std::string, std::string> meta{
      {"reward_mode", demos::reward_mode_name(ds.reward_mode)},
      {"gamma", cfg.get("gamma")},
      {"lambda_cal", cfg.get("lambda_cal")},
      {"rho", cfg.get("rho")},
      {"m_policy_samples", cfg.get("m_policy_samples")},
      {"batch", cfg.get("critic_batch")},
      {"steps", cfg.get("critic_steps")},
      {"lr", cfg.get("critic_lr")},
      {"hidden", cfg.get("critic_hidden")},
      {"seed", cfg.get("seed")},
      {"train_task_ids", join(sorted_ids, ",")},
      {"policy_hash", hash_hex(hash_file(cfg.get("policy")))},
      {"dataset", cfg.get("dataset")},
  };
  critic::save_critic(out / "critic.json", trained.critic, meta);
  std::ofstream lf(out / "critic_train_log.csv", std::ios::binary);
  lf << "step,bellman_loss,cal_reg,mean_q_data,mean_q_pi\n";
  int interval = cfg.get_int("log_interval");
  for (const auto& row : trained.log)
    if (row.step % interval == 0)
      lf << row.step << "," << row.bellman << "," << row.cal << "," << row.mean_q_data << ","
         << row.mean_q_pi << "\n";
  std::cout << "train-critic: " << cc.train_steps << " steps on " << filtered.transitions.size()
            << " transitions (" << join(sorted_ids, ",") << ")\n";
}

namespace {

void save_eval_episodes(const RunConfig& cfg, const world::Benchmark& bench,
                        const eval::ExperimentReport& report, const policy::PolicyNet& pol,
                        const critic::CriticNet* critic, const jiti::JitiConfig& jcfg) {
  // Re-run the cells' rollouts serially to write logs; cheap relative to the
  // experiment itself and keeps the parallel path free of IO.
  auto out = cfg.out_dir() / "rollouts";
  for (const auto& cell : report.cells) {
    const world::TaskSpec& task = bench.task_by_id(cell.task_id);
    std::filesystem::path dir = out / cell.task_id / jiti::mode_name(cell.mode);
    std::filesystem::create_directories(dir);
    for (size_t r = 0; r < cell.outcomes.size(); ++r) {
      auto res = jiti::rollout(task, cell.mode, pol, critic, jcfg, cell.outcomes[r].seed);
      std::filesystem::path path = dir / (std::to_string(r) + ".jsonl");
      demos::save_episode(path, res.episode, task);
      append_decision_records(path, res.stats);
    }
  }
}

}  // namespace

void cmd_eval(const RunConfig& cfg) {
  ExecMode mode = exec_mode(cfg);
  world::Benchmark bench = load_bench(cfg);
  if (cfg.get("policy").empty()) throw ConfigError("missing required config key: policy");
  policy::PolicyNet pol = policy::load_policy(cfg.get("policy"));
  auto out = cfg.out_dir();
  std::filesystem::create_directories(out);
  cfg.write_resolved(out);

  eval::ExperimentSpec spec;
  spec.n_rollouts = cfg.get_int("n_rollouts");
  spec.seed = cfg.get_seed();
  spec.jiti_config = jiti_config_of(cfg);
  for (const std::string& m : split_list(cfg.get("modes"))) spec.modes.push_back(jiti::mode_from_name(m));

  bool needs_critic = false;
  for (auto m : spec.modes) needs_critic |= m != jiti::GuidanceMode::base_only;
  std::optional<critic::LoadedCritic> crit;
  if (needs_critic || cfg.get_flag("split_eval")) {
    if (cfg.get("critic").empty()) throw ConfigError("missing required config key: critic");
    crit = critic::load_critic(cfg.get("critic"));
    if (crit->critic.obs_dim != pol.obs_dim)
      throw ConfigError("critic/policy observation dims disagree");
  }

  std::map<std::string, std::string> fp_fields;
  fp_fields["benchmark_hash"] = hash_hex(hash_file(cfg.get("benchmark")));
  fp_fields["policy_hash"] = hash_hex(hash_file(cfg.get("policy")));
  if (crit) fp_fields["critic_hash"] = hash_hex(hash_file(cfg.get("critic")));

  std::string how;
  if (crit) {
    std::vector<int> calib_tasks;
    if (cfg.get_flag("split_eval")) calib_tasks = bench.split_indices("seen");
    spec.jiti_config.threshold =
        resolve_threshold(cfg, bench, calib_tasks, pol, crit->critic, spec.jiti_config, mode, &how);
    jiti::validate(spec.jiti_config);
    fp_fields["tau_jiti_resolved"] = std::to_string(spec.jiti_config.threshold);
    fp_fields["tau_jiti_source"] = how;
  }

  auto finish_report = [&](eval::ExperimentReport& report, const std::string& stem) {
    report.config = fp_fields;
    for (const auto& [k, v] : std::map<std::string, std::string>{
             {"seed", cfg.get("seed")},
             {"n_rollouts", cfg.get("n_rollouts")},
             {"modes", cfg.get("modes")},
             {"window_k", cfg.get("window_k")},
             {"n_candidates", cfg.get("n_candidates")}})
      report.config[k] = v;
    uint64_t h = fnv1a64(cfg.resolved_text());
    for (const auto& [k, v] : report.config) h = fnv1a64(k + "=" + v + ";", h);
    report.fingerprint = hash_hex(h);
    eval::write_report(report, out, stem);
  };

  if (cfg.get_flag("split_eval")) {
    eval::GeneralizationReport gen = eval::generalization_split(
        bench, pol, crit->critic, crit->meta, spec, mode);
    finish_report(gen.seen, "seen");
    finish_report(gen.unseen, "unseen");
    std::cout << "eval(split): seen base->jiti "
              << gen.seen.average_esr(jiti::GuidanceMode::base_only) << " -> "
              << gen.seen.average_esr(jiti::GuidanceMode::jiti) << "; unseen "
              << gen.unseen.average_esr(jiti::GuidanceMode::base_only) << " -> "
              << gen.unseen.average_esr(jiti::GuidanceMode::jiti) << "\n";
    return;
  }

  eval::ExperimentReport report =
      eval::run_experiment(bench, pol, crit ? &crit->critic : nullptr, spec, mode);
  finish_report(report, "report");
  if (cfg.get_flag("save_episodes"))
    save_eval_episodes(cfg, bench, report, pol, crit ? &crit->critic : nullptr, spec.jiti_config);
  for (auto m : spec.modes)
    std::cout << "eval: " << jiti::mode_name(m) << " avg ESR " << report.average_esr(m) << "\n";
}

void cmd_ablate(const RunConfig& cfg) {
  ExecMode mode = exec_mode(cfg);
  world::Benchmark bench = load_bench(cfg);
  if (cfg.get("policy").empty() || cfg.get("critic").empty() || cfg.get("critic_b").empty())
    throw ConfigError("ablate needs policy, critic (task_specific) and critic_b (binary_terminal)");
  policy::PolicyNet pol = policy::load_policy(cfg.get("policy"));
  critic::LoadedCritic a = critic::load_critic(cfg.get("critic"));
  critic::LoadedCritic b = critic::load_critic(cfg.get("critic_b"));
  auto out = cfg.out_dir();
  std::filesystem::create_directories(out);
  cfg.write_resolved(out);

  eval::ExperimentSpec spec;
  spec.n_rollouts = cfg.get_int("n_rollouts");
  spec.seed = cfg.get_seed();
  spec.jiti_config = jiti_config_of(cfg);
  spec.modes = {jiti::GuidanceMode::jiti};
  std::string how;
  spec.jiti_config.threshold =
      resolve_threshold(cfg, bench, {}, pol, a.critic, spec.jiti_config, mode, &how);
  jiti::validate(spec.jiti_config);

  eval::AblationReport rep = eval::ablate_reward(bench, pol, a.critic, a.meta, b.critic, b.meta, spec, mode);
  auto fp = [&](eval::ExperimentReport& r, const std::string& arm) {
    r.config["arm"] = arm;
    r.config["tau_jiti_resolved"] = std::to_string(spec.jiti_config.threshold);
    r.fingerprint = hash_hex(fnv1a64(cfg.resolved_text() + arm));
    eval::write_report(r, out, "ablation_" + arm);
  };
  fp(rep.arm_task_specific, "task_specific");
  fp(rep.arm_binary, "binary_terminal");
  std::cout << "ablate: task_specific avg ESR "
            << rep.arm_task_specific.average_esr(jiti::GuidanceMode::jiti) << ", binary_terminal "
            << rep.arm_binary.average_esr(jiti::GuidanceMode::jiti) << "\n";
}

void cmd_replay(const RunConfig& cfg) {
  if (cfg.get("episodes").empty()) throw ConfigError("missing required config key: episodes");
  std::filesystem::path target = cfg.get("episodes");
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(target)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(target))
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(target);
  }
  if (files.empty()) throw ConfigError("replay: no episode logs under " + target.string());

  int failures = 0;
  for (const auto& file : files) {
    demos::LoadedEpisode ep = demos::load_episode(file);
    world::WorldState state = ep.initial;
    int diverged_at = -1;
    for (size_t t = 0; t < ep.actions.size(); ++t) {
      auto [next, events] = world::step(ep.constants, state, ep.actions[t]);
      if (!(next == ep.states[t]) || !(events == ep.events[t])) {
        diverged_at = static_cast<int>(t);
        break;
      }
      state = std::move(next);
    }
    bool ok = diverged_at < 0;
    if (ok) {
      itcdsl::EvalContext ctx;
      ctx.initial = &ep.initial;
      ctx.states = ep.states;
      ctx.events = ep.events;
      ctx.task_object = ep.task_object;
      bool success = itcdsl::evaluate(ep.success_expr, ctx);
      bool elegant = success && itcdsl::evaluate(ep.elegance_expr, ctx);
      if (success != ep.success || elegant != ep.elegant) {
        ok = false;
        std::cout << "FAIL " << file.string() << " (stored outcome flags disagree with re-evaluation)\n";
      }
    } else {
      std::cout << "FAIL " << file.string() << " (first divergence at step " << diverged_at << ")\n";
    }
    if (ok)
      std::cout << "PASS " << file.string() << "\n";
    else
      ++failures;
  }
  if (failures > 0)
    throw VerifyError("replay: " + std::to_string(failures) + " of " + std::to_string(files.size()) +
                      " episode logs failed verification");
  std::cout << "replay: " << files.size() << " episode logs verified\n";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const VerifyError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 2;
  return 1;
}

}  // namespace elegance::cli
