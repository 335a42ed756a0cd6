#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "elegance/cli.hpp"
#include "elegance/critic.hpp"
#include "elegance/demos.hpp"
#include "elegance/policy.hpp"

using namespace elegance;
using namespace elegance::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kTasksDir = ELEGANCE_TASKS_DIR;

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("elegance_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

RunConfig gen_config(const fs::path& out, int episodes_per_task, const std::string& mode = "both") {
  RunConfig cfg;
  cfg.set("benchmark", (kTasksDir / "gen" / "benchmark.txt").string());
  cfg.set("out", out.string());
  cfg.set("episodes_per_task", std::to_string(episodes_per_task));
  cfg.set("reward_mode", mode);
  cfg.set("seed", "12");
  return cfg;
}

}  // namespace

TEST_CASE("config: defaults, files, overrides, rejection of unknown keys") {
  RunConfig cfg;
  CHECK(cfg.get("gamma") == "0.98");
  CHECK(cfg.get_double("lambda_cal") == 5.0);
  CHECK(cfg.get_int("window_k") == 5);
  CHECK_THROWS_AS(cfg.set("not_a_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.get("nope"), ConfigError);

  auto dir = fresh_dir("config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "# comment\n gamma = 0.99 \nn_rollouts = 7\n";
  }
  RunConfig loaded = RunConfig::from_file(dir / "run.cfg");
  CHECK(loaded.get_double("gamma") == 0.99);
  CHECK(loaded.get_int("n_rollouts") == 7);
  {
    std::ofstream f(dir / "bad.cfg");
    f << "mystery = 1\n";
  }
  CHECK_THROWS_AS(RunConfig::from_file(dir / "bad.cfg"), ConfigError);
  {
    std::ofstream f(dir / "noeq.cfg");
    f << "gamma 0.5\n";
  }
  CHECK_THROWS_AS(RunConfig::from_file(dir / "noeq.cfg"), ConfigError);

  CHECK_THROWS_AS(loaded.get_int("gamma"), ConfigError);
  loaded.set("split_eval", "on");
  CHECK(loaded.get_flag("split_eval"));
  loaded.set("split_eval", "maybe");
  CHECK_THROWS_AS(loaded.get_flag("split_eval"), ConfigError);

  // resolved text is sorted and parseable
  std::string text = cfg.resolved_text();
  CHECK(text.find("benchmark = ") < text.find("gamma = "));
  fs::remove_all(dir);
}

TEST_CASE("output root env var prefixes relative out dirs") {
  RunConfig cfg;
  cfg.set("out", "sub/dir");
  setenv("ELEGANCE_OUT_ROOT", "/tmp/elegance_root", 1);
  CHECK(cfg.out_dir() == fs::path("/tmp/elegance_root/sub/dir"));
  unsetenv("ELEGANCE_OUT_ROOT");
  cfg.set("out", "/abs/path");
  CHECK(cfg.out_dir() == fs::path("/abs/path"));
}

TEST_CASE("gen-data writes episodes, datasets, and a manifest, reproducibly") {
  auto out1 = fresh_dir("gen1");
  auto out2 = fresh_dir("gen2");
  cmd_gen_data(gen_config(out1, 3));
  cmd_gen_data(gen_config(out2, 3));

  CHECK(fs::exists(out1 / "resolved.cfg"));
  CHECK(fs::exists(out1 / "manifest.json"));
  std::string manifest = slurp(out1 / "manifest.json");
  CHECK(manifest.find("\"n_tasks\": 7") != std::string::npos);

  int ep_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(out1 / "episodes"))
    if (e.is_regular_file()) ++ep_files;
  CHECK(ep_files == 21);  // 7 tasks x 3 episodes

  // reruns are byte-identical
  CHECK(slurp(out1 / "dataset_task_specific.jsonl") == slurp(out2 / "dataset_task_specific.jsonl"));
  CHECK(slurp(out1 / "dataset_binary_terminal.jsonl") == slurp(out2 / "dataset_binary_terminal.jsonl"));
  CHECK(slurp(out1 / "manifest.json") == slurp(out2 / "manifest.json"));

  // both reward modes share the episode set; only rewards may differ
  auto a = demos::load_dataset(out1 / "dataset_task_specific.jsonl");
  auto b = demos::load_dataset(out1 / "dataset_binary_terminal.jsonl");
  REQUIRE(a.transitions.size() == b.transitions.size());
  for (size_t i = 0; i < a.transitions.size(); ++i) {
    CHECK(a.transitions[i].obs == b.transitions[i].obs);
    CHECK(a.transitions[i].chunk == b.transitions[i].chunk);
  }
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("train-policy with zero steps reproduces the initialization, with a log") {
  auto data = fresh_dir("tp_data");
  cmd_gen_data(gen_config(data, 2, "task_specific"));
  auto out = fresh_dir("tp_out");
  RunConfig cfg;
  cfg.set("dataset", (data / "dataset_task_specific.jsonl").string());
  cfg.set("out", out.string());
  cfg.set("policy_steps", "0");
  cfg.set("seed", "4");
  cmd_train_policy(cfg);
  CHECK(fs::exists(out / "policy.json"));
  CHECK(slurp(out / "policy_train_log.csv") == "step,loss\n");

  auto ds = demos::load_dataset(data / "dataset_task_specific.jsonl");
  policy::FlowConfig fc;
  fc.hidden = cli::parse_hidden(cli::RunConfig().get("policy_hidden"));
  policy::PolicyNet expect =
      policy::make_policy(ds.obs_dim, ds.action_dim, ds.chunk_len, fc, derive_seed(4, "policy-init"));
  policy::PolicyNet got = policy::load_policy(out / "policy.json");
  CHECK(got.net == expect.net);

  // a second zero-step run reproduces the checkpoint bytes
  auto out2 = fresh_dir("tp_out2");
  cfg.set("out", out2.string());
  cmd_train_policy(cfg);
  CHECK(slurp(out / "policy.json") == slurp(out2 / "policy.json"));
  fs::remove_all(data);
  fs::remove_all(out);
  fs::remove_all(out2);
}

TEST_CASE("train-policy log rows follow the log interval") {
  auto data = fresh_dir("tl_data");
  cmd_gen_data(gen_config(data, 2, "task_specific"));
  auto out = fresh_dir("tl_out");
  RunConfig cfg;
  cfg.set("dataset", (data / "dataset_task_specific.jsonl").string());
  cfg.set("out", out.string());
  cfg.set("policy_steps", "200");
  cfg.set("policy_hidden", "16");
  cfg.set("log_interval", "50");
  cmd_train_policy(cfg);
  std::string log = slurp(out / "policy_train_log.csv");
  int rows = static_cast<int>(std::count(log.begin(), log.end(), '\n')) - 1;
  CHECK(rows == 200 / 50);  // steps 0, 50, 100, 150
  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("train-critic trains on a task filter and records metadata") {
  auto data = fresh_dir("tc_data");
  cmd_gen_data(gen_config(data, 2, "task_specific"));
  auto pol_out = fresh_dir("tc_pol");
  RunConfig pcfg;
  pcfg.set("dataset", (data / "dataset_task_specific.jsonl").string());
  pcfg.set("out", pol_out.string());
  pcfg.set("policy_steps", "0");
  pcfg.set("policy_hidden", "16");
  cmd_train_policy(pcfg);

  auto out = fresh_dir("tc_out");
  RunConfig cfg;
  cfg.set("benchmark", (kTasksDir / "gen" / "benchmark.txt").string());
  cfg.set("dataset", (data / "dataset_task_specific.jsonl").string());
  cfg.set("policy", (pol_out / "policy.json").string());
  cfg.set("out", out.string());
  cfg.set("critic_steps", "5");
  cfg.set("critic_hidden", "8");
  cfg.set("train_tasks", "seen");
  cmd_train_critic(cfg);
  auto loaded = critic::load_critic(out / "critic.json");
  CHECK(loaded.meta.at("train_task_ids") == "seen_alphabet_soup,seen_ketchup,seen_milk");
  CHECK(loaded.meta.at("reward_mode") == "task_specific");
  CHECK(fs::exists(out / "critic_train_log.csv"));
  std::string log = slurp(out / "critic_train_log.csv");
  CHECK(log.rfind("step,bellman_loss,cal_reg,mean_q_data,mean_q_pi\n", 0) == 0);

  RunConfig bad = cfg;
  bad.set("train_tasks", "no_such_task");
  CHECK_THROWS_AS(cmd_train_critic(bad), ConfigError);
  fs::remove_all(data);
  fs::remove_all(pol_out);
  fs::remove_all(out);
}

TEST_CASE("replay passes on untouched logs and fails on a perturbed one") {
  auto data = fresh_dir("rp_data");
  cmd_gen_data(gen_config(data, 2, "task_specific"));

  RunConfig cfg;
  cfg.set("episodes", (data / "episodes").string());
  cmd_replay(cfg);  // throws on any failure

  // verdict re-evaluation across the logs
  int checked = 0;
  for (const auto& e : fs::recursive_directory_iterator(data / "episodes")) {
    if (!e.is_regular_file()) continue;
    auto ep = demos::load_episode(e.path());
    itcdsl::EvalContext ctx;
    ctx.initial = &ep.initial;
    ctx.states = ep.states;
    ctx.events = ep.events;
    ctx.task_object = ep.task_object;
    CHECK(itcdsl::evaluate(ep.success_expr, ctx) == ep.success);
    ++checked;
  }
  CHECK(checked == 14);

  // corrupt one state coordinate in one log
  fs::path victim;
  for (const auto& e : fs::recursive_directory_iterator(data / "episodes"))
    if (e.is_regular_file()) {
      victim = e.path();
      break;
    }
  std::string content = slurp(victim);
  auto pos = content.find("\"gripper\":{\"grip\":", content.find('\n'));
  REQUIRE(pos != std::string::npos);
  content.replace(pos + 18, 0, " ");  // harmless whitespace: still passes
  {
    std::ofstream f(victim, std::ios::binary);
    f << content;
  }
  cmd_replay(cfg);

  // now a real perturbation: flip a held_index in a step record
  auto line_start = content.find("\n{\"action\"");
  auto hpos = content.find("\"held_index\":-1", line_start);
  REQUIRE(hpos != std::string::npos);
  content.replace(hpos + 13, 2, "99");
  {
    std::ofstream f(victim, std::ios::binary);
    f << content;
  }
  RunConfig one;
  one.set("episodes", victim.string());
  CHECK_THROWS_AS(cmd_replay(one), VerifyError);
  fs::remove_all(data);
}

TEST_CASE("exit codes map error types") {
  CHECK(exit_code_for(ConfigError("x")) == 1);
  CHECK(exit_code_for(NumericError("x")) == 2);
  CHECK(exit_code_for(VerifyError("x")) == 3);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}
