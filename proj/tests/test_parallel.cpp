#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>

#include "elegance/critic.hpp"
#include "elegance/demos.hpp"
#include "elegance/eval.hpp"
#include "elegance/policy.hpp"

using namespace elegance;

namespace {

const std::filesystem::path kTasksDir = ELEGANCE_TASKS_DIR;

const world::Benchmark& bench() {
  static world::Benchmark b = world::load_benchmark(kTasksDir / "main" / "benchmark.txt");
  return b;
}

demos::ElegantDataset small_dataset() {
  std::vector<demos::Episode> eps;
  for (int t : {0, 2}) {
    auto recipe = demos::recipe_for_task(bench().tasks[t], 4);
    for (size_t i = 0; i < recipe.size(); ++i)
      eps.push_back(demos::generate_demo(bench().tasks[t], recipe[i],
                                         derive_seed(derive_seed(3, bench().tasks[t].id), i)));
  }
  return demos::build_dataset(eps, bench().tasks, 10, demos::RewardMode::task_specific, 0.98);
}

bool grads_equal(const numerics::MlpGrads& a, const numerics::MlpGrads& b) {
  for (size_t li = 0; li < a.layers.size(); ++li)
    if (a.layers[li].w.data != b.layers[li].w.data || a.layers[li].b.data != b.layers[li].b.data)
      return false;
  return true;
}

}  // namespace

TEST_CASE("parallel_for covers every index exactly once and propagates exceptions") {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(257, ExecMode::parallel, [&](int i) { hits[i] += 1; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(
      parallel_for(8, ExecMode::parallel, [](int i) { if (i == 5) throw NumericError("boom"); }),
      NumericError);
}

TEST_CASE("flow-matching loss and gradients are bitwise equal across exec modes") {
  auto ds = small_dataset();
  policy::FlowConfig fc;
  fc.hidden = {32, 32};
  policy::PolicyNet pol = policy::make_policy(ds.obs_dim, ds.action_dim, ds.chunk_len, fc, 5);
  Rng rng(7);
  std::vector<int> rows(48);
  for (int& r : rows) r = rng.uniform_int(static_cast<int>(ds.transitions.size()));
  policy::FlowDraws draws = policy::draw_flow_batch(rng, 48, pol.chunk_dim());
  numerics::MlpGrads gs, gp;
  double ls = policy::fm_loss(pol, ds, rows, draws, &gs, ExecMode::serial);
  double lp = policy::fm_loss(pol, ds, rows, draws, &gp, ExecMode::parallel);
  CHECK(ls == lp);
  CHECK(grads_equal(gs, gp));
}

TEST_CASE("critic losses are bitwise equal across exec modes") {
  auto ds = small_dataset();
  policy::FlowConfig pf;
  pf.hidden = {16};
  policy::PolicyNet pol = policy::make_policy(ds.obs_dim, ds.action_dim, ds.chunk_len, pf, 6);
  critic::CalQLConfig cc;
  cc.hidden = {24, 24};
  critic::CriticNet online = critic::make_critic(ds.obs_dim, ds.action_dim, ds.chunk_len, cc, 8);
  critic::TargetNet target = critic::make_critic(ds.obs_dim, ds.action_dim, ds.chunk_len, cc, 9);
  auto v_mu_all = critic::mc_returns(ds, 0.98);
  auto next = critic::next_transition_index(ds);
  Rng rng(10);
  std::vector<int> rows(32);
  std::vector<double> v_mu(32);
  for (size_t i = 0; i < rows.size(); ++i) {
    rows[i] = rng.uniform_int(static_cast<int>(ds.transitions.size()));
    v_mu[i] = v_mu_all[rows[i]];
  }
  critic::CriticDraws draws = critic::draw_critic_batch(rng, 32);

  numerics::MlpGrads bs, bp, rs, rp;
  double bell_s = critic::bellman_loss(online, target, pol, ds, rows, next, draws, 4, 0.98, &bs,
                                       ExecMode::serial);
  double bell_p = critic::bellman_loss(online, target, pol, ds, rows, next, draws, 4, 0.98, &bp,
                                       ExecMode::parallel);
  CHECK(bell_s == bell_p);
  CHECK(grads_equal(bs, bp));
  double reg_s = critic::cal_reg(online, pol, ds, rows, v_mu, draws, 4, &rs, nullptr, ExecMode::serial);
  double reg_p = critic::cal_reg(online, pol, ds, rows, v_mu, draws, 4, &rp, nullptr, ExecMode::parallel);
  CHECK(reg_s == reg_p);
  CHECK(grads_equal(rs, rp));
}

TEST_CASE("training end-to-end is bitwise independent of the exec mode") {
  auto ds = small_dataset();
  policy::FlowConfig fc;
  fc.hidden = {16};
  fc.train_steps = 40;
  fc.batch = 16;
  policy::PolicyNet a = policy::train_policy(ds, fc, 3, nullptr, ExecMode::serial);
  policy::PolicyNet b = policy::train_policy(ds, fc, 3, nullptr, ExecMode::parallel);
  CHECK(a.net == b.net);

  critic::CalQLConfig cc;
  cc.hidden = {16};
  cc.train_steps = 20;
  cc.batch = 8;
  auto ca = critic::train_critic(ds, a, cc, 4, ExecMode::serial);
  auto cb = critic::train_critic(ds, b, cc, 4, ExecMode::parallel);
  CHECK(ca.critic.net == cb.critic.net);
  CHECK(ca.target.net == cb.target.net);
}

TEST_CASE("experiment cells are identical across exec modes") {
  policy::FlowConfig fc;
  fc.hidden = {16};
  policy::PolicyNet pol =
      policy::make_policy(world::observation_dim(bench().tasks[0]), world::kActionDim, 10, fc, 12);
  critic::CalQLConfig cc;
  cc.hidden = {16};
  critic::CriticNet crit =
      critic::make_critic(pol.obs_dim, world::kActionDim, 10, cc, 13);
  eval::ExperimentSpec spec;
  spec.modes = {jiti::GuidanceMode::base_only, jiti::GuidanceMode::full_guidance, jiti::GuidanceMode::jiti};
  spec.task_indices = {0, 6};
  spec.n_rollouts = 4;
  spec.seed = 77;
  spec.jiti_config.threshold = 0.05;
  auto rs = eval::run_experiment(bench(), pol, &crit, spec, ExecMode::serial);
  auto rp = eval::run_experiment(bench(), pol, &crit, spec, ExecMode::parallel);
  REQUIRE(rs.cells.size() == rp.cells.size());
  for (size_t i = 0; i < rs.cells.size(); ++i) {
    CHECK(rs.cells[i].esr_pct == rp.cells[i].esr_pct);
    CHECK(rs.cells[i].success_pct == rp.cells[i].success_pct);
    CHECK(rs.cells[i].mean_interventions == rp.cells[i].mean_interventions);
    CHECK(rs.cells[i].mean_critic_calls == rp.cells[i].mean_critic_calls);
    for (size_t j = 0; j < rs.cells[i].outcomes.size(); ++j) {
      CHECK(rs.cells[i].outcomes[j].success == rp.cells[i].outcomes[j].success);
      CHECK(rs.cells[i].outcomes[j].interventions == rp.cells[i].outcomes[j].interventions);
    }
  }
}
