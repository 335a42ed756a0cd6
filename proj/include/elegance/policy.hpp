#pragma once

#include <span>
#include <vector>

#include "elegance/demos.hpp"
#include "elegance/mlp.hpp"
#include "elegance/parallel.hpp"

namespace elegance::policy {

struct FlowConfig {
  int euler_steps = 10;
  int train_steps = 6000;
  int batch = 64;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::vector<int> hidden = {64, 64};
};

// Flow-matching policy over action chunks: the net is the vector field
// v(noisy_chunk, obs, flow_time) -> chunk velocity, with the flow time fed as
// one extra scalar input in [0, 1].
struct PolicyNet {
  numerics::MlpParams net;
  int obs_dim = 0;
  int action_dim = 0;
  int chunk_len = 0;
  FlowConfig config;

  int chunk_dim() const { return action_dim * chunk_len; }
};

PolicyNet make_policy(int obs_dim, int action_dim, int chunk_len, const FlowConfig& config, uint64_t seed);

// Per-sample randomness of the flow-matching loss, drawn by the caller so the
// loss itself is deterministic (finite differences rely on this).
struct FlowDraws {
  std::vector<double> tau;           // one per row
  std::vector<std::vector<double>> noise;  // one chunk-sized vector per row
};

FlowDraws draw_flow_batch(Rng& rng, int rows, int chunk_dim);

// Linear interpolation between noise (flow time 0) and the clean chunk
// (flow time 1).
std::vector<double> interpolate_chunk(std::span<const double> chunk, std::span<const double> noise,
                                      double flow_time);

// Mean squared error between v(interpolated, obs, t) and (chunk - noise),
// averaged over rows and coordinates. Row gradients are computed into
// per-row slots (parallelizable) and reduced in index order, so serial and
// parallel execution agree bitwise.
double fm_loss(const PolicyNet& policy, const demos::ElegantDataset& ds, std::span<const int> rows,
               const FlowDraws& draws, numerics::MlpGrads* grads, ExecMode mode = ExecMode::parallel);

struct TrainLogRow {
  int step = 0;
  double loss = 0;
};

PolicyNet train_policy(const demos::ElegantDataset& ds, const FlowConfig& config, uint64_t seed,
                       std::vector<TrainLogRow>* log = nullptr, ExecMode mode = ExecMode::parallel);

// Midpoint Euler integration of the learned field from a seeded standard
// normal draw; the result is clamped per-coordinate to [-1, 1].
std::vector<double> sample_action(const PolicyNet& policy, std::span<const double> obs, uint64_t seed);

// N chunks from sub-seeds derive_seed(seed, i); candidate 0 is the default
// action used by guidance, and is the same chunk regardless of how many
// candidates are requested.
std::vector<std::vector<double>> sample_candidates(const PolicyNet& policy, std::span<const double> obs,
                                                   int n, uint64_t seed);

void save_policy(const std::filesystem::path& path, const PolicyNet& policy);
PolicyNet load_policy(const std::filesystem::path& path);

}  // namespace elegance::policy
