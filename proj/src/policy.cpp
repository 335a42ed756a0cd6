#include "elegance/policy.hpp"

#include <algorithm>
#include <cmath>

#include "elegance/adamw.hpp"
#include "elegance/checkpoint.hpp"

namespace elegance::policy {

using numerics::MlpGrads;
using numerics::MlpParams;
using numerics::Tensor;

PolicyNet make_policy(int obs_dim, int action_dim, int chunk_len, const FlowConfig& config, uint64_t seed) {
  PolicyNet p;
  p.obs_dim = obs_dim;
  p.action_dim = action_dim;
  p.chunk_len = chunk_len;
  p.config = config;
  std::vector<int> dims{obs_dim + action_dim * chunk_len + 1};
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(action_dim * chunk_len);
  p.net = numerics::make_mlp(dims, numerics::Activation::tanh_fn, seed);
  return p;
}

FlowDraws draw_flow_batch(Rng& rng, int rows, int chunk_dim) {
  FlowDraws d;
  d.tau.resize(rows);
  d.noise.resize(rows);
  for (int i = 0; i < rows; ++i) {
    d.tau[i] = rng.uniform01();
    d.noise[i].resize(chunk_dim);
    for (double& v : d.noise[i]) v = rng.normal();
  }
  return d;
}

std::vector<double> interpolate_chunk(std::span<const double> chunk, std::span<const double> noise,
                                      double flow_time) {
  std::vector<double> out(chunk.size());
  for (size_t i = 0; i < chunk.size(); ++i)
    out[i] = flow_time * chunk[i] + (1.0 - flow_time) * noise[i];
  return out;
}

namespace {

Tensor field_input(const PolicyNet& p, std::span<const double> obs, std::span<const double> noisy,
                   double flow_time) {
  std::vector<double> in;
  in.reserve(p.obs_dim + p.chunk_dim() + 1);
  in.insert(in.end(), obs.begin(), obs.end());
  in.insert(in.end(), noisy.begin(), noisy.end());
  in.push_back(flow_time);
  return Tensor::vector(std::move(in));
}

}  // namespace

double fm_loss(const PolicyNet& policy, const demos::ElegantDataset& ds, std::span<const int> rows,
               const FlowDraws& draws, MlpGrads* grads, ExecMode mode) {
  if (rows.empty()) throw ConfigError("fm_loss: empty batch");
  int n = static_cast<int>(rows.size());
  int dim = policy.chunk_dim();
  std::vector<double> row_loss(n, 0.0);
  std::vector<MlpGrads> row_grads;
  if (grads) row_grads.assign(n, MlpGrads{});

  double denom = static_cast<double>(n) * dim;
  parallel_for(n, mode, [&](int i) {
    const demos::Transition& tr = ds.transitions[rows[i]];
    std::vector<double> noisy = interpolate_chunk(tr.chunk, draws.noise[i], draws.tau[i]);
    Tensor input = field_input(policy, tr.obs, noisy, draws.tau[i]);
    numerics::ForwardTrace trace;
    Tensor out = numerics::mlp_forward(policy.net, input, grads ? &trace : nullptr);
    double loss = 0;
    Tensor upstream = Tensor::zeros({dim});
    for (int j = 0; j < dim; ++j) {
      double target = tr.chunk[j] - draws.noise[i][j];
      double diff = out.data[j] - target;
      loss += diff * diff;
      upstream.data[j] = 2.0 * diff / denom;
    }
    row_loss[i] = loss;
    if (grads) row_grads[i] = numerics::mlp_backward(policy.net, trace, upstream).param_grads;
  });

  double total = 0;
  for (int i = 0; i < n; ++i) total += row_loss[i];
  total /= denom;
  if (!std::isfinite(total)) throw NumericError("fm_loss: non-finite loss");
  if (grads) {
    *grads = numerics::zeros_like(policy.net);
    for (int i = 0; i < n; ++i) grads->add_scaled(row_grads[i], 1.0);
  }
  return total;
}

PolicyNet train_policy(const demos::ElegantDataset& ds, const FlowConfig& config, uint64_t seed,
                       std::vector<TrainLogRow>* log, ExecMode mode) {
  if (ds.transitions.empty()) throw ConfigError("train_policy: empty dataset");
  PolicyNet policy = make_policy(ds.obs_dim, ds.action_dim, ds.chunk_len, config,
                                 derive_seed(seed, "policy-init"));
  Rng rng(derive_seed(seed, "policy-train"));
  numerics::AdamWHyper hyper;
  hyper.lr = config.lr;
  hyper.weight_decay = config.weight_decay;
  numerics::AdamWState opt = numerics::make_adamw_state(policy.net, hyper);
  int n = static_cast<int>(ds.transitions.size());
  std::vector<int> rows(config.batch);
  MlpGrads grads;
  for (int step = 0; step < config.train_steps; ++step) {
    for (int& r : rows) r = rng.uniform_int(n);
    FlowDraws draws = draw_flow_batch(rng, config.batch, policy.chunk_dim());
    double loss = fm_loss(policy, ds, rows, draws, &grads, mode);
    if (loss > 1e3) throw NumericError("train_policy diverged at step " + std::to_string(step));
    numerics::adamw_step(policy.net, grads, opt);
    if (log && (step % 50 == 0 || step + 1 == config.train_steps)) log->push_back({step, loss});
  }
  return policy;
}

std::vector<double> sample_action(const PolicyNet& policy, std::span<const double> obs, uint64_t seed) {
  if (static_cast<int>(obs.size()) != policy.obs_dim)
    throw ConfigError("sample_action: observation dim mismatch");
  int dim = policy.chunk_dim();
  Rng rng(seed);
  std::vector<double> chunk(dim);
  for (double& v : chunk) v = rng.normal();
  int steps = policy.config.euler_steps;
  double dt = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    // Midpoint time sampling keeps the integral exact for fields that are
    // affine in the flow time, independent of the step count.
    double t = (s + 0.5) * dt;
    Tensor v = numerics::mlp_forward(policy.net, field_input(policy, obs, chunk, t));
    for (int j = 0; j < dim; ++j) chunk[j] += dt * v.data[j];
  }
  for (double& v : chunk) {
    if (!std::isfinite(v)) throw NumericError("sample_action: non-finite chunk");
    v = std::clamp(v, -1.0, 1.0);
  }
  return chunk;
}

std::vector<std::vector<double>> sample_candidates(const PolicyNet& policy, std::span<const double> obs,
                                                   int n, uint64_t seed) {
  if (n < 1) throw ConfigError("sample_candidates: n must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_action(policy, obs, derive_seed(seed, static_cast<uint64_t>(i))));
  return out;
}

void save_policy(const std::filesystem::path& path, const PolicyNet& policy) {
  std::map<std::string, std::string> meta{
      {"kind", "policy"},
      {"obs_dim", std::to_string(policy.obs_dim)},
      {"action_dim", std::to_string(policy.action_dim)},
      {"k", std::to_string(policy.chunk_len)},
      {"euler_steps", std::to_string(policy.config.euler_steps)},
  };
  numerics::save_mlp(path, policy.net, meta);
}

PolicyNet load_policy(const std::filesystem::path& path) {
  numerics::LoadedMlp loaded = numerics::load_mlp(path);
  if (loaded.meta["kind"] != "policy") throw ConfigError("not a policy checkpoint: " + path.string());
  PolicyNet p;
  p.net = std::move(loaded.params);
  p.obs_dim = std::stoi(loaded.meta.at("obs_dim"));
  p.action_dim = std::stoi(loaded.meta.at("action_dim"));
  p.chunk_len = std::stoi(loaded.meta.at("k"));
  p.config.euler_steps = std::stoi(loaded.meta.at("euler_steps"));
  return p;
}

}  // namespace elegance::policy
