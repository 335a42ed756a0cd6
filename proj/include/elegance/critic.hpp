#pragma once

#include <optional>
#include <span>
#include <vector>

#include "elegance/policy.hpp"

namespace elegance::critic {

struct CalQLConfig {
  double gamma = 0.98;
  double lambda_cal = 5.0;
  double rho = 5e-3;       // soft target update rate
  int m_policy_samples = 4;
  int batch = 32;
  int train_steps = 4000;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::vector<int> hidden = {64, 64};
};

struct CriticNet {
  numerics::MlpParams net;
  int obs_dim = 0;
  int action_dim = 0;
  int chunk_len = 0;

  int chunk_dim() const { return action_dim * chunk_len; }
};

// Slowly updated parameter copy used for Bellman targets.
using TargetNet = CriticNet;

CriticNet make_critic(int obs_dim, int action_dim, int chunk_len, const CalQLConfig& config, uint64_t seed);

double q_value(const CriticNet& critic, std::span<const double> obs, std::span<const double> chunk);

// Discounted Monte-Carlo return-to-go per transition, computed from episode
// linkage; this is the behavioral value the calibration regularizer floors
// against.
std::vector<double> mc_returns(const demos::ElegantDataset& ds, double gamma);
inline std::vector<double> mc_returns(const demos::ElegantDataset& ds) { return mc_returns(ds, ds.gamma); }

// For each transition, the index of the next transition in its episode, or -1.
std::vector<int> next_transition_index(const demos::ElegantDataset& ds);

// Per-row candidate seeds, drawn by the trainer so both losses are
// deterministic functions of (params, batch, draws).
struct CriticDraws {
  std::vector<uint64_t> backup_seed;  // policy candidates at s'
  std::vector<uint64_t> reg_seed;     // policy candidates at s
};

CriticDraws draw_critic_batch(Rng& rng, int rows);

// Squared TD residual against r + gamma * (1-done) * max_a' Q_target(s', a'),
// with the max taken over m policy samples at s'; the target is a constant
// (no gradient flows through it).
double bellman_loss(const CriticNet& critic, const TargetNet& target, const policy::PolicyNet& pol,
                    const demos::ElegantDataset& ds, std::span<const int> rows,
                    std::span<const int> next_index, const CriticDraws& draws, int m_policy_samples,
                    double gamma, numerics::MlpGrads* grads, ExecMode mode = ExecMode::parallel);

struct CalRegStats {
  int policy_branch = 0;  // rows where E_pi Q attained the max
  int floor_branch = 0;   // rows where the behavioral value attained it
  double mean_q_data = 0;
  double mean_q_pi = 0;
};

// max(E_{a~pi} Q(s,a), V_mu(s)) - E_{a~D} Q(s,a), averaged over rows.
// Gradients flow through the policy term only where it attains the max.
double cal_reg(const CriticNet& critic, const policy::PolicyNet& pol, const demos::ElegantDataset& ds,
               std::span<const int> rows, std::span<const double> v_mu, const CriticDraws& draws,
               int m_policy_samples, numerics::MlpGrads* grads, CalRegStats* stats = nullptr,
               ExecMode mode = ExecMode::parallel);

void soft_update(TargetNet& target, const CriticNet& online, double rho);

struct CriticLogRow {
  int step = 0;
  double bellman = 0;
  double cal = 0;
  double mean_q_data = 0;
  double mean_q_pi = 0;
};

struct TrainedCritic {
  CriticNet critic;
  TargetNet target;
  std::vector<CriticLogRow> log;
};

// Minibatch steps of bellman + lambda * cal_reg with AdamW, soft target
// update after every step. Deterministic given the seed.
TrainedCritic train_critic(const demos::ElegantDataset& ds, const policy::PolicyNet& pol,
                           const CalQLConfig& config, uint64_t seed, ExecMode mode = ExecMode::parallel);

void save_critic(const std::filesystem::path& path, const CriticNet& critic,
                 const std::map<std::string, std::string>& extra_meta = {});

struct LoadedCritic {
  CriticNet critic;
  std::map<std::string, std::string> meta;
};

LoadedCritic load_critic(const std::filesystem::path& path);

}  // namespace elegance::critic
