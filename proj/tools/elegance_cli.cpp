#include <iostream>

#include <CLI11.hpp>

#include "elegance/cli.hpp"

using namespace elegance;

int main(int argc, char** argv) {
  CLI::App app{"elegance: flow policy + Cal-QL critic + just-in-time guidance on a 2-D manipulation bench"};
  app.require_subcommand(1);

  struct SubSpec {
    std::string name;
    std::string desc;
    void (*fn)(const cli::RunConfig&);
  };
  const std::vector<SubSpec> subs = {
      {"gen-data", "generate mixed-quality demonstrations and the reward-annotated dataset",
       cli::cmd_gen_data},
      {"train-policy", "train the flow-matching base policy", cli::cmd_train_policy},
      {"train-critic", "train the Cal-QL elegance critic", cli::cmd_train_critic},
      {"eval", "run guidance-mode comparisons (or the seen/unseen split)", cli::cmd_eval},
      {"ablate", "paired reward-formulation ablation", cli::cmd_ablate},
      {"replay", "re-simulate episode logs and verify them bit-exactly", cli::cmd_replay},
  };

  struct SubState {
    CLI::App* cmd = nullptr;
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
    void (*fn)(const cli::RunConfig&) = nullptr;
  };
  std::vector<SubState> states(subs.size());

  for (size_t i = 0; i < subs.size(); ++i) {
    SubState& st = states[i];
    st.fn = subs[i].fn;
    st.cmd = app.add_subcommand(subs[i].name, subs[i].desc);
    st.cmd->add_option("--config", st.config_file, "flat key = value config file");
    for (const auto& key : cli::config_keys()) {
      // Flags mirror config keys; a flag overrides the file.
      st.cmd->add_option_function<std::string>(
          "--" + key.name,
          [&st, name = key.name](const std::string& v) { st.overrides.emplace_back(name, v); },
          key.doc);
    }
  }

  CLI11_PARSE(app, argc, argv);

  for (const SubState& st : states) {
    if (!st.cmd->parsed()) continue;
    try {
      cli::RunConfig cfg =
          st.config_file.empty() ? cli::RunConfig() : cli::RunConfig::from_file(st.config_file);
      for (const auto& [k, v] : st.overrides) cfg.set(k, v);
      st.fn(cfg);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return cli::exit_code_for(e);
    }
  }
  return 1;
}
