#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "elegance/critic.hpp"

using namespace elegance;
using namespace elegance::critic;

namespace {

demos::ElegantDataset dataset_from_rewards(const std::vector<std::vector<double>>& episodes_rewards,
                                           int obs_dim = 2, int action_dim = 1, int k = 1) {
  demos::ElegantDataset ds;
  ds.obs_dim = obs_dim;
  ds.action_dim = action_dim;
  ds.chunk_len = k;
  ds.gamma = 0.98;
  Rng rng(19);
  for (size_t e = 0; e < episodes_rewards.size(); ++e) {
    for (size_t i = 0; i < episodes_rewards[e].size(); ++i) {
      demos::Transition tr;
      tr.episode = "ep/" + std::to_string(e);
      tr.index = static_cast<int>(i);
      tr.task_id = "t";
      tr.obs.resize(obs_dim);
      for (double& v : tr.obs) v = rng.uniform(-1, 1);
      tr.chunk.resize(static_cast<size_t>(action_dim) * k);
      for (double& v : tr.chunk) v = rng.uniform(-1, 1);
      tr.next_obs = tr.obs;
      tr.reward = episodes_rewards[e][i];
      tr.done = i + 1 == episodes_rewards[e].size();
      ds.transitions.push_back(std::move(tr));
    }
  }
  ds.task_ids = {"t"};
  return ds;
}

policy::PolicyNet zero_field_policy(int obs_dim, int action_dim, int k) {
  policy::FlowConfig fc;
  fc.hidden = {};
  policy::PolicyNet p = policy::make_policy(obs_dim, action_dim, k, fc, 1);
  for (auto& l : p.net.layers)
    for (double& v : l.w.data) v = 0;
  return p;
}

CriticNet bias_critic(int obs_dim, int action_dim, int k, double bias) {
  CalQLConfig cc;
  cc.hidden = {};
  CriticNet c = make_critic(obs_dim, action_dim, k, cc, 1);
  for (double& v : c.net.layers[0].w.data) v = 0;
  c.net.layers[0].b.data[0] = bias;
  return c;
}

// Q = w * chunk[0] + b, insensitive to the observation.
CriticNet linear_chunk_critic(int obs_dim, double w, double b) {
  CalQLConfig cc;
  cc.hidden = {};
  CriticNet c = make_critic(obs_dim, 1, 1, cc, 1);
  for (double& v : c.net.layers[0].w.data) v = 0;
  c.net.layers[0].w.data[obs_dim] = w;  // the chunk input sits after the obs block
  c.net.layers[0].b.data[0] = b;
  return c;
}

bool grads_close(const numerics::MlpGrads& a, const numerics::MlpGrads& b, double rel, double floor) {
  for (size_t li = 0; li < a.layers.size(); ++li) {
    auto ok = [&](const std::vector<double>& x, const std::vector<double>& y) {
      for (size_t j = 0; j < x.size(); ++j) {
        double denom = std::max({std::fabs(x[j]), std::fabs(y[j]), floor / rel});
        if (std::fabs(x[j] - y[j]) > rel * denom) return false;
      }
      return true;
    };
    if (!ok(a.layers[li].w.data, b.layers[li].w.data)) return false;
    if (!ok(a.layers[li].b.data, b.layers[li].b.data)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("mc returns: hand examples") {
  auto ds1 = dataset_from_rewards({{1, 0, 0}});
  auto v1 = mc_returns(ds1);
  CHECK(v1 == std::vector<double>{1, 0, 0});
  auto ds2 = dataset_from_rewards({{0, 0, 1}});
  auto v2 = mc_returns(ds2);
  CHECK(v2[0] == doctest::Approx(0.9604));
  CHECK(v2[1] == doctest::Approx(0.98));
  CHECK(v2[2] == 1.0);
}

TEST_CASE("mc returns match an independent backward-scan oracle exactly") {
  Rng rng(4);
  std::vector<std::vector<double>> eps;
  for (int e = 0; e < 20; ++e) {
    std::vector<double> rs(1 + rng.uniform_int(12));
    for (double& r : rs) r = rng.uniform_int(2);
    eps.push_back(rs);
  }
  auto ds = dataset_from_rewards(eps);
  auto got = mc_returns(ds);
  // oracle: independent per-episode backward scan over the reward lists
  std::vector<double> expect;
  for (const auto& rs : eps) {
    std::vector<double> v(rs.size());
    double acc = 0;
    for (int i = static_cast<int>(rs.size()) - 1; i >= 0; --i) {
      acc = rs[i] + 0.98 * acc;
      v[i] = acc;
    }
    expect.insert(expect.end(), v.begin(), v.end());
  }
  CHECK(got == expect);
}

TEST_CASE("mc returns reject broken episode linkage") {
  auto ds = dataset_from_rewards({{0, 1}});
  ds.transitions[1].index = 5;
  CHECK_THROWS_AS(mc_returns(ds), ConfigError);
}

TEST_CASE("bellman residual on fixed critic/target values") {
  // Q = 1.2 everywhere, target net = 0.5 everywhere, r = 1, gamma = 0.98:
  // residual = 1.2 - (1 + 0.49) = -0.29, loss = 0.0841.
  auto ds = dataset_from_rewards({{1, 0}});
  ds.transitions[0].reward = 1;
  CriticNet online = bias_critic(2, 1, 1, 1.2);
  TargetNet target = bias_critic(2, 1, 1, 0.5);
  auto pol = zero_field_policy(2, 1, 1);
  auto next = next_transition_index(ds);
  Rng rng(1);
  CriticDraws draws = draw_critic_batch(rng, 1);
  std::vector<int> rows = {0};
  double loss = bellman_loss(online, target, pol, ds, rows, next, draws, 4, 0.98, nullptr);
  CHECK(loss == doctest::Approx(0.0841));
}

TEST_CASE("terminal transitions back up exactly the reward") {
  auto ds = dataset_from_rewards({{1}});
  CriticNet online = bias_critic(2, 1, 1, 1.2);
  TargetNet target = bias_critic(2, 1, 1, 123.0);  // must be ignored
  auto pol = zero_field_policy(2, 1, 1);
  auto next = next_transition_index(ds);
  Rng rng(1);
  CriticDraws draws = draw_critic_batch(rng, 1);
  std::vector<int> rows = {0};
  double loss = bellman_loss(online, target, pol, ds, rows, next, draws, 4, 0.98, nullptr);
  CHECK(loss == doctest::Approx((1.2 - 1.0) * (1.2 - 1.0)));
}

TEST_CASE("backup max with one sample equals that sample's value") {
  // With a bias target, any candidate set gives the same max; check the
  // degenerate M=1 case agrees with brute force over the same candidate.
  auto ds = dataset_from_rewards({{0, 0}});
  CriticNet online = bias_critic(2, 1, 1, 0.0);
  auto pol = zero_field_policy(2, 1, 1);
  CalQLConfig cc;
  cc.hidden = {4};
  TargetNet target = make_critic(2, 1, 1, cc, 7);
  auto next = next_transition_index(ds);
  Rng rng(2);
  CriticDraws draws = draw_critic_batch(rng, 1);
  std::vector<int> rows = {0};
  double loss = bellman_loss(online, target, pol, ds, rows, next, draws, 1, 0.98, nullptr);
  // brute force over the same single candidate
  auto cands = policy::sample_candidates(pol, ds.transitions[0].next_obs, 1, draws.backup_seed[0]);
  double best = q_value(target, ds.transitions[0].next_obs, cands[0]);
  double expect = (0.0 - 0.98 * best) * (0.0 - 0.98 * best);
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("calibration regularizer value matches the spec arithmetic in both branches") {
  auto ds = dataset_from_rewards({{0}});
  ds.transitions[0].chunk = {0.75};
  auto pol = zero_field_policy(2, 1, 1);
  Rng rng(3);
  CriticDraws draws = draw_critic_batch(rng, 1);
  std::vector<int> rows = {0};

  // candidates are pure clamped noise; recover their mean to place e_pi
  auto cands = policy::sample_candidates(pol, ds.transitions[0].obs, 4, draws.reg_seed[0]);
  double mean_c = 0;
  for (const auto& c : cands) mean_c += c[0] / 4.0;
  REQUIRE(std::fabs(mean_c - 0.75) > 1e-6);

  auto solve = [&](double e_pi_target, double e_d_target) {
    double w = (e_pi_target - e_d_target) / (mean_c - 0.75);
    double b = e_d_target - w * 0.75;
    return linear_chunk_critic(2, w, b);
  };

  // E_pi = 1.0, V = 2.0, E_D = 1.5 -> max(1,2) - 1.5 = 0.5 (floor branch)
  CriticNet floor_case = solve(1.0, 1.5);
  std::vector<double> v_mu = {2.0};
  CalRegStats stats;
  double reg = cal_reg(floor_case, pol, ds, rows, v_mu, draws, 4, nullptr, &stats);
  CHECK(reg == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(stats.floor_branch == 1);

  // E_pi = 3.0, V = 2.0, E_D = 1.5 -> 3 - 1.5 = 1.5 (policy branch)
  CriticNet policy_case = solve(3.0, 1.5);
  double reg2 = cal_reg(policy_case, pol, ds, rows, v_mu, draws, 4, nullptr, &stats);
  CHECK(reg2 == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(stats.policy_branch == 1);
}

TEST_CASE("combined objective gradient matches finite differences on both branches") {
  auto ds = dataset_from_rewards({{0, 1}, {1, 0}});
  policy::FlowConfig pf;
  pf.hidden = {6};
  auto pol = policy::make_policy(2, 1, 1, pf, 5);
  CalQLConfig cc;
  cc.hidden = {8, 8};
  CriticNet critic = make_critic(2, 1, 1, cc, 11);
  TargetNet target = make_critic(2, 1, 1, cc, 12);
  auto next = next_transition_index(ds);
  Rng rng(6);
  std::vector<int> rows = {0, 1, 2, 3};
  CriticDraws draws = draw_critic_batch(rng, 4);
  // force two rows onto each branch of the max (kept small; a huge constant
  // offset would wreck finite-difference precision)
  std::vector<double> v_mu = {5, 5, -5, -5};
  double lambda = 5.0;

  numerics::MlpGrads bell_g, reg_g;
  CalRegStats stats;
  bellman_loss(critic, target, pol, ds, rows, next, draws, 3, 0.98, &bell_g);
  cal_reg(critic, pol, ds, rows, v_mu, draws, 3, &reg_g, &stats);
  CHECK(stats.policy_branch == 2);
  CHECK(stats.floor_branch == 2);
  numerics::MlpGrads analytic = bell_g;
  analytic.add_scaled(reg_g, lambda);

  auto loss_fn = [&](const numerics::MlpParams& params) {
    CriticNet probe = critic;
    probe.net = params;
    double b = bellman_loss(probe, target, pol, ds, rows, next, draws, 3, 0.98, nullptr);
    double r = cal_reg(probe, pol, ds, rows, v_mu, draws, 3, nullptr, nullptr);
    return b + lambda * r;
  };
  numerics::MlpGrads numeric = numerics::finite_diff_grad(loss_fn, critic.net, 1e-5);
  CHECK(grads_close(analytic, numeric, 1e-4, 1e-7));
}

TEST_CASE("soft update blends by rho") {
  CalQLConfig cc;
  cc.hidden = {4};
  CriticNet online = make_critic(2, 1, 1, cc, 1);
  TargetNet target = make_critic(2, 1, 1, cc, 2);
  TargetNet orig = target;

  TargetNet t1 = target;
  soft_update(t1, online, 1.0);
  CHECK(t1.net == online.net);
  TargetNet t0 = target;
  soft_update(t0, online, 0.0);
  CHECK(t0.net == orig.net);

  CriticNet ones = bias_critic(2, 1, 1, 1.0);
  for (auto& l : ones.net.layers)
    for (double& v : l.w.data) v = 1.0;
  CriticNet zeros = bias_critic(2, 1, 1, 0.0);
  CalQLConfig c0;
  c0.hidden = {};
  TargetNet tz = make_critic(2, 1, 1, c0, 3);
  for (auto& l : tz.net.layers) {
    for (double& v : l.w.data) v = 0;
    for (double& v : l.b.data) v = 0;
  }
  soft_update(tz, ones, 5e-3);
  CHECK(tz.net.layers[0].w.data[0] == doctest::Approx(0.005).epsilon(1e-15));

  // geometric approach: with frozen online parameters the gap decays (1-rho)^n
  TargetNet tracking = make_critic(2, 1, 1, cc, 9);
  double initial_gap = tracking.net.layers[0].w.data[0] - online.net.layers[0].w.data[0];
  for (int n = 0; n < 100; ++n) soft_update(tracking, online, 0.05);
  double expect = online.net.layers[0].w.data[0] + initial_gap * std::pow(0.95, 100);
  CHECK(tracking.net.layers[0].w.data[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("q_value matches direct forward composition and checks dims") {
  CalQLConfig cc;
  cc.hidden = {6};
  CriticNet c = make_critic(3, 2, 2, cc, 21);
  std::vector<double> obs = {0.1, 0.2, 0.3}, chunk = {0.5, -0.5, 0.25, 0.0};
  std::vector<double> input = obs;
  input.insert(input.end(), chunk.begin(), chunk.end());
  double direct = numerics::mlp_forward(c.net, numerics::Tensor::vector(input)).data[0];
  CHECK(q_value(c, obs, chunk) == direct);
  CHECK(q_value(bias_critic(3, 2, 2, 0.7), obs, chunk) == 0.7);
  CHECK_THROWS_AS(q_value(c, chunk, obs), ConfigError);
}

TEST_CASE("zero training steps leave target equal to online equal to init") {
  auto ds = dataset_from_rewards({{1, 0}});
  auto pol = zero_field_policy(2, 1, 1);
  CalQLConfig cc;
  cc.hidden = {4};
  cc.train_steps = 0;
  TrainedCritic out = train_critic(ds, pol, cc, 42);
  CriticNet init = make_critic(2, 1, 1, cc, derive_seed(42, "critic-init"));
  CHECK(out.critic.net == init.net);
  CHECK(out.target.net == init.net);
}

TEST_CASE("training is deterministic given the seed") {
  auto ds = dataset_from_rewards({{1, 0}, {0, 1}});
  auto pol = zero_field_policy(2, 1, 1);
  CalQLConfig cc;
  cc.hidden = {6};
  cc.train_steps = 30;
  cc.batch = 4;
  TrainedCritic a = train_critic(ds, pol, cc, 5);
  TrainedCritic b = train_critic(ds, pol, cc, 5);
  CHECK(a.critic.net == b.critic.net);
  CHECK(a.target.net == b.target.net);
}

TEST_CASE("singleton fixed point: terminal r=1 drives Q to 1") {
  demos::ElegantDataset ds = dataset_from_rewards({{1}});
  auto pol = zero_field_policy(2, 1, 1);
  CalQLConfig cc;
  cc.hidden = {8, 8};
  cc.lambda_cal = 0.0;
  cc.train_steps = 1500;
  cc.batch = 8;
  cc.lr = 3e-3;
  TrainedCritic out = train_critic(ds, pol, cc, 77);
  double q = q_value(out.critic, ds.transitions[0].obs, ds.transitions[0].chunk);
  CHECK(q == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("critic checkpoints round-trip with metadata") {
  CalQLConfig cc;
  cc.hidden = {8};
  CriticNet c = make_critic(4, 2, 3, cc, 31);
  auto path = std::filesystem::temp_directory_path() / "elegance_critic_test.json";
  save_critic(path, c, {{"reward_mode", "task_specific"}, {"train_task_ids", "a,b"}});
  LoadedCritic back = load_critic(path);
  CHECK(back.critic.net == c.net);
  CHECK(back.critic.obs_dim == 4);
  CHECK(back.meta.at("reward_mode") == "task_specific");
  CHECK(back.meta.at("train_task_ids") == "a,b");
  std::filesystem::remove(path);
}
