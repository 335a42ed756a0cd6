#include "elegance/critic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "elegance/adamw.hpp"
#include "elegance/checkpoint.hpp"

namespace elegance::critic {

using numerics::MlpGrads;
using numerics::Tensor;

CriticNet make_critic(int obs_dim, int action_dim, int chunk_len, const CalQLConfig& config, uint64_t seed) {
  CriticNet c;
  c.obs_dim = obs_dim;
  c.action_dim = action_dim;
  c.chunk_len = chunk_len;
  std::vector<int> dims{obs_dim + action_dim * chunk_len};
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(1);
  c.net = numerics::make_mlp(dims, numerics::Activation::tanh_fn, seed);
  return c;
}

namespace {

Tensor critic_input(std::span<const double> obs, std::span<const double> chunk) {
  std::vector<double> in;
  in.reserve(obs.size() + chunk.size());
  in.insert(in.end(), obs.begin(), obs.end());
  in.insert(in.end(), chunk.begin(), chunk.end());
  return Tensor::vector(std::move(in));
}

}  // namespace

double q_value(const CriticNet& critic, std::span<const double> obs, std::span<const double> chunk) {
  if (static_cast<int>(obs.size()) != critic.obs_dim ||
      static_cast<int>(chunk.size()) != critic.chunk_dim())
    throw ConfigError("q_value: dimension mismatch");
  return numerics::mlp_forward(critic.net, critic_input(obs, chunk)).data[0];
}

std::vector<double> mc_returns(const demos::ElegantDataset& ds, double gamma) {
  // Transitions of one episode appear consecutively in index order; verify
  // linkage rather than assume it.
  std::vector<double> out(ds.transitions.size(), 0.0);
  int i = static_cast<int>(ds.transitions.size()) - 1;
  while (i >= 0) {
    int end = i;
    const std::string& ep = ds.transitions[i].episode;
    int start = end;
    while (start > 0 && ds.transitions[start - 1].episode == ep) --start;
    for (int j = start; j <= end; ++j)
      if (ds.transitions[j].index != j - start)
        throw ConfigError("mc_returns: broken episode linkage in " + ep);
    double acc = 0;
    for (int j = end; j >= start; --j) {
      acc = ds.transitions[j].reward + gamma * acc;
      out[j] = acc;
    }
    i = start - 1;
  }
  return out;
}

std::vector<int> next_transition_index(const demos::ElegantDataset& ds) {
  std::vector<int> next(ds.transitions.size(), -1);
  for (size_t i = 0; i + 1 < ds.transitions.size(); ++i)
    if (ds.transitions[i].episode == ds.transitions[i + 1].episode &&
        ds.transitions[i + 1].index == ds.transitions[i].index + 1)
      next[i] = static_cast<int>(i + 1);
  return next;
}

CriticDraws draw_critic_batch(Rng& rng, int rows) {
  CriticDraws d;
  d.backup_seed.resize(rows);
  d.reg_seed.resize(rows);
  for (int i = 0; i < rows; ++i) d.backup_seed[i] = rng.next_u64();
  for (int i = 0; i < rows; ++i) d.reg_seed[i] = rng.next_u64();
  return d;
}

double bellman_loss(const CriticNet& critic, const TargetNet& target, const policy::PolicyNet& pol,
                    const demos::ElegantDataset& ds, std::span<const int> rows,
                    std::span<const int> next_index, const CriticDraws& draws, int m_policy_samples,
                    double gamma, MlpGrads* grads, ExecMode mode) {
  if (rows.empty()) throw ConfigError("bellman_loss: empty batch");
  int n = static_cast<int>(rows.size());
  std::vector<double> row_loss(n, 0.0);
  std::vector<MlpGrads> row_grads;
  if (grads) row_grads.assign(n, MlpGrads{});

  parallel_for(n, mode, [&](int i) {
    const demos::Transition& tr = ds.transitions[rows[i]];
    double backup = 0.0;
    if (!tr.done) {
      // max over policy candidates at s'. The next dataset action is kept out
      // of the max: the calibration term raises dataset-action values, and
      // bootstrapping through them lets that pressure compound without bound.
      double best = -std::numeric_limits<double>::infinity();
      auto cands = policy::sample_candidates(pol, tr.next_obs, m_policy_samples, draws.backup_seed[i]);
      for (const auto& c : cands) best = std::max(best, q_value(target, tr.next_obs, c));
      (void)next_index;
      backup = gamma * best;
    }
    double target_value = tr.reward + backup;
    Tensor input = critic_input(tr.obs, tr.chunk);
    numerics::ForwardTrace trace;
    Tensor out = numerics::mlp_forward(critic.net, input, grads ? &trace : nullptr);
    double residual = out.data[0] - target_value;
    row_loss[i] = residual * residual;
    if (grads) {
      Tensor upstream = Tensor::vector({2.0 * residual / n});
      row_grads[i] = numerics::mlp_backward(critic.net, trace, upstream).param_grads;
    }
  });

  double total = 0;
  for (int i = 0; i < n; ++i) total += row_loss[i];
  total /= n;
  if (!std::isfinite(total)) throw NumericError("bellman_loss: non-finite loss");
  if (grads) {
    *grads = numerics::zeros_like(critic.net);
    for (int i = 0; i < n; ++i) grads->add_scaled(row_grads[i], 1.0);
  }
  return total;
}

double cal_reg(const CriticNet& critic, const policy::PolicyNet& pol, const demos::ElegantDataset& ds,
               std::span<const int> rows, std::span<const double> v_mu, const CriticDraws& draws,
               int m_policy_samples, MlpGrads* grads, CalRegStats* stats, ExecMode mode) {
  if (rows.empty()) throw ConfigError("cal_reg: empty batch");
  if (v_mu.size() != rows.size()) throw ConfigError("cal_reg: V_mu not aligned with batch rows");
  int n = static_cast<int>(rows.size());
  std::vector<double> row_value(n, 0.0), row_q_data(n, 0.0), row_q_pi(n, 0.0);
  std::vector<int> row_branch(n, 0);  // 1 = policy term attained the max
  std::vector<MlpGrads> row_grads;
  if (grads) row_grads.assign(n, MlpGrads{});

  parallel_for(n, mode, [&](int i) {
    const demos::Transition& tr = ds.transitions[rows[i]];
    auto cands = policy::sample_candidates(pol, tr.obs, m_policy_samples, draws.reg_seed[i]);
    double e_pi = 0;
    std::vector<numerics::ForwardTrace> traces(grads ? cands.size() : 0);
    for (size_t c = 0; c < cands.size(); ++c) {
      Tensor input = critic_input(tr.obs, cands[c]);
      e_pi += numerics::mlp_forward(critic.net, input, grads ? &traces[c] : nullptr).data[0];
    }
    e_pi /= static_cast<double>(cands.size());

    Tensor data_input = critic_input(tr.obs, tr.chunk);
    numerics::ForwardTrace data_trace;
    double q_data = numerics::mlp_forward(critic.net, data_input, grads ? &data_trace : nullptr).data[0];

    bool policy_branch = e_pi >= v_mu[i];
    row_branch[i] = policy_branch ? 1 : 0;
    row_value[i] = std::max(e_pi, v_mu[i]) - q_data;
    row_q_data[i] = q_data;
    row_q_pi[i] = e_pi;

    if (grads) {
      MlpGrads g = numerics::zeros_like(critic.net);
      if (policy_branch) {
        double w = 1.0 / (n * static_cast<double>(cands.size()));
        for (size_t c = 0; c < cands.size(); ++c) {
          auto gr = numerics::mlp_backward(critic.net, traces[c], Tensor::vector({w}));
          g.add_scaled(gr.param_grads, 1.0);
        }
      }
      auto gd = numerics::mlp_backward(critic.net, data_trace, Tensor::vector({-1.0 / n}));
      g.add_scaled(gd.param_grads, 1.0);
      row_grads[i] = std::move(g);
    }
  });

  double total = 0;
  for (int i = 0; i < n; ++i) total += row_value[i];
  total /= n;
  if (!std::isfinite(total)) throw NumericError("cal_reg: non-finite value");
  if (grads) {
    *grads = numerics::zeros_like(critic.net);
    for (int i = 0; i < n; ++i) grads->add_scaled(row_grads[i], 1.0);
  }
  if (stats) {
    stats->policy_branch = 0;
    stats->floor_branch = 0;
    stats->mean_q_data = 0;
    stats->mean_q_pi = 0;
    for (int i = 0; i < n; ++i) {
      stats->policy_branch += row_branch[i];
      stats->floor_branch += 1 - row_branch[i];
      stats->mean_q_data += row_q_data[i] / n;
      stats->mean_q_pi += row_q_pi[i] / n;
    }
  }
  return total;
}

void soft_update(TargetNet& target, const CriticNet& online, double rho) {
  if (target.net.layers.size() != online.net.layers.size())
    throw ConfigError("soft_update: layer structure mismatch");
  for (size_t li = 0; li < target.net.layers.size(); ++li) {
    auto blend = [rho](std::vector<double>& t, const std::vector<double>& o) {
      if (t.size() != o.size()) throw ConfigError("soft_update: shape mismatch");
      for (size_t j = 0; j < t.size(); ++j) t[j] = rho * o[j] + (1.0 - rho) * t[j];
    };
    blend(target.net.layers[li].w.data, online.net.layers[li].w.data);
    blend(target.net.layers[li].b.data, online.net.layers[li].b.data);
  }
}

TrainedCritic train_critic(const demos::ElegantDataset& ds, const policy::PolicyNet& pol,
                           const CalQLConfig& config, uint64_t seed, ExecMode mode) {
  if (ds.transitions.empty()) throw ConfigError("train_critic: empty dataset");
  TrainedCritic out;
  out.critic = make_critic(ds.obs_dim, ds.action_dim, ds.chunk_len, config, derive_seed(seed, "critic-init"));
  out.target = out.critic;
  Rng rng(derive_seed(seed, "critic-train"));
  numerics::AdamWHyper hyper;
  hyper.lr = config.lr;
  hyper.weight_decay = config.weight_decay;
  numerics::AdamWState opt = numerics::make_adamw_state(out.critic.net, hyper);
  std::vector<double> v_mu_all = mc_returns(ds, config.gamma);
  std::vector<int> next_index = next_transition_index(ds);
  int n = static_cast<int>(ds.transitions.size());
  std::vector<int> rows(config.batch);
  std::vector<double> v_mu(config.batch);
  MlpGrads bell_grads, reg_grads;
  for (int step = 0; step < config.train_steps; ++step) {
    for (int i = 0; i < config.batch; ++i) {
      rows[i] = rng.uniform_int(n);
      v_mu[i] = v_mu_all[rows[i]];
    }
    CriticDraws draws = draw_critic_batch(rng, config.batch);
    double bell = bellman_loss(out.critic, out.target, pol, ds, rows, next_index, draws,
                               config.m_policy_samples, config.gamma, &bell_grads, mode);
    CalRegStats stats;
    double reg = cal_reg(out.critic, pol, ds, rows, v_mu, draws, config.m_policy_samples, &reg_grads,
                         &stats, mode);
    double total = bell + config.lambda_cal * reg;
    if (std::fabs(total) > 1e3) throw NumericError("train_critic diverged at step " + std::to_string(step));
    bell_grads.add_scaled(reg_grads, config.lambda_cal);
    numerics::adamw_step(out.critic.net, bell_grads, opt);
    soft_update(out.target, out.critic, config.rho);
    if (step % 50 == 0 || step + 1 == config.train_steps)
      out.log.push_back({step, bell, reg, stats.mean_q_data, stats.mean_q_pi});
  }
  return out;
}

void save_critic(const std::filesystem::path& path, const CriticNet& critic,
                 const std::map<std::string, std::string>& extra_meta) {
  std::map<std::string, std::string> meta = extra_meta;
  meta["kind"] = "critic";
  meta["obs_dim"] = std::to_string(critic.obs_dim);
  meta["action_dim"] = std::to_string(critic.action_dim);
  meta["k"] = std::to_string(critic.chunk_len);
  numerics::save_mlp(path, critic.net, meta);
}

LoadedCritic load_critic(const std::filesystem::path& path) {
  numerics::LoadedMlp loaded = numerics::load_mlp(path);
  if (loaded.meta["kind"] != "critic") throw ConfigError("not a critic checkpoint: " + path.string());
  LoadedCritic out;
  out.critic.net = std::move(loaded.params);
  out.critic.obs_dim = std::stoi(loaded.meta.at("obs_dim"));
  out.critic.action_dim = std::stoi(loaded.meta.at("action_dim"));
  out.critic.chunk_len = std::stoi(loaded.meta.at("k"));
  out.meta = std::move(loaded.meta);
  return out;
}

}  // namespace elegance::critic
