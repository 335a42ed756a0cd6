#pragma once

#include "elegance/config.hpp"

namespace elegance::cli {

// Subcommand bodies. They throw ConfigError / NumericError / VerifyError;
// the executable maps those to exit codes 1 / 2 / 3.
void cmd_gen_data(const RunConfig& cfg);
void cmd_train_policy(const RunConfig& cfg);
void cmd_train_critic(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_ablate(const RunConfig& cfg);
void cmd_replay(const RunConfig& cfg);

int exit_code_for(const std::exception& e);

}  // namespace elegance::cli
