// Benchmark comparing the serial reference path against the OpenMP one on the
// two hot kernels: batched flow-matching gradients and evaluation rollouts.
// Also asserts the two paths agree bitwise, which is the contract that makes
// the parallel path safe to enable everywhere.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "elegance/critic.hpp"
#include "elegance/demos.hpp"
#include "elegance/eval.hpp"
#include "elegance/policy.hpp"

using namespace elegance;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

demos::ElegantDataset synthetic_dataset(int episodes, int steps, int obs_dim, uint64_t seed) {
  // Random transitions with valid episode linkage; enough for kernel timing.
  demos::ElegantDataset ds;
  ds.chunk_len = 10;
  ds.obs_dim = obs_dim;
  Rng rng(seed);
  for (int e = 0; e < episodes; ++e) {
    int n = steps / ds.chunk_len;
    for (int i = 0; i < n; ++i) {
      demos::Transition tr;
      tr.episode = "synthetic/" + std::to_string(e);
      tr.index = i;
      tr.task_id = "synthetic";
      tr.obs.resize(obs_dim);
      for (double& v : tr.obs) v = rng.normal();
      tr.chunk.resize(static_cast<size_t>(ds.chunk_len) * ds.action_dim);
      for (double& v : tr.chunk) v = rng.uniform(-1, 1);
      tr.next_obs = tr.obs;
      tr.done = i + 1 == n;
      tr.reward = tr.done ? 1.0 : 0.0;
      ds.transitions.push_back(std::move(tr));
    }
  }
  ds.task_ids = {"synthetic"};
  return ds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"elegance-bench: serial vs OpenMP kernel comparison"};
  int reps = 20;
  int batch = 64;
  int rollouts = 16;
  std::string tasks_dir;
  app.add_option("--reps", reps, "timing repetitions");
  app.add_option("--batch", batch, "gradient batch size");
  app.add_option("--rollouts", rollouts, "rollouts per timing cell");
  app.add_option("--tasks", tasks_dir, "benchmark manifest for the rollout cell");
  CLI11_PARSE(app, argc, argv);

  std::printf("threads available: %d\n", thread_count());

  demos::ElegantDataset ds = synthetic_dataset(32, 120, 48, 7);
  policy::FlowConfig fc;
  fc.hidden = {64, 64};
  policy::PolicyNet pol = policy::make_policy(ds.obs_dim, ds.action_dim, ds.chunk_len, fc, 11);

  Rng rng(3);
  std::vector<int> rows(batch);
  for (int& r : rows) r = rng.uniform_int(static_cast<int>(ds.transitions.size()));
  policy::FlowDraws draws = policy::draw_flow_batch(rng, batch, pol.chunk_dim());

  numerics::MlpGrads g_serial, g_parallel;
  double serial_ms = 0, parallel_ms = 0, loss_serial = 0, loss_parallel = 0;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    loss_serial = policy::fm_loss(pol, ds, rows, draws, &g_serial, ExecMode::serial);
    serial_ms += ms_since(t0);
    t0 = Clock::now();
    loss_parallel = policy::fm_loss(pol, ds, rows, draws, &g_parallel, ExecMode::parallel);
    parallel_ms += ms_since(t0);
  }
  bool grads_equal = loss_serial == loss_parallel;
  for (size_t li = 0; grads_equal && li < g_serial.layers.size(); ++li)
    grads_equal = g_serial.layers[li].w.data == g_parallel.layers[li].w.data &&
                  g_serial.layers[li].b.data == g_parallel.layers[li].b.data;
  std::printf("fm_loss grads  batch=%-4d serial %8.2f ms  parallel %8.2f ms  speedup %.2fx  bitwise %s\n",
              batch, serial_ms / reps, parallel_ms / reps, serial_ms / parallel_ms,
              grads_equal ? "equal" : "DIFFERENT");
  if (!grads_equal) return 1;

  if (!tasks_dir.empty()) {
    world::Benchmark bench = world::load_benchmark(tasks_dir);
    critic::CalQLConfig cc;
    policy::PolicyNet rpol =
        policy::make_policy(world::observation_dim(bench.tasks[0]), world::kActionDim, 10, fc, 21);
    critic::CriticNet crit =
        critic::make_critic(rpol.obs_dim, rpol.action_dim, rpol.chunk_len, cc, 22);
    jiti::JitiConfig jc;
    jc.threshold = 0.05;
    eval::ExperimentSpec spec;
    spec.modes = {jiti::GuidanceMode::jiti};
    spec.task_indices = {0};
    spec.n_rollouts = rollouts;
    spec.seed = 5;
    spec.jiti_config = jc;
    auto t0 = Clock::now();
    auto rep_serial = eval::run_experiment(bench, rpol, &crit, spec, ExecMode::serial);
    double roll_serial = ms_since(t0);
    t0 = Clock::now();
    auto rep_parallel = eval::run_experiment(bench, rpol, &crit, spec, ExecMode::parallel);
    double roll_parallel = ms_since(t0);
    bool same = rep_serial.cells[0].esr_pct == rep_parallel.cells[0].esr_pct &&
                rep_serial.cells[0].mean_critic_calls == rep_parallel.cells[0].mean_critic_calls;
    std::printf("rollout cell   n=%-6d serial %8.2f ms  parallel %8.2f ms  speedup %.2fx  results %s\n",
                rollouts, roll_serial, roll_parallel, roll_serial / roll_parallel,
                same ? "equal" : "DIFFERENT");
    if (!same) return 1;
  }
  return 0;
}
