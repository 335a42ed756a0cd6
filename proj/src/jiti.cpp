#include "elegance/jiti.hpp"

#include <cmath>

namespace elegance::jiti {

void validate(const JitiConfig& config) {
  if (!(config.threshold >= 0.0))
    throw ConfigError("jiti threshold must be >= 0");
  if (config.window_k < 2)
    throw ConfigError("jiti window_k must be >= 2 (with k=1 the fluctuation is always 0)");
  if (config.n_candidates < 2) throw ConfigError("jiti n_candidates must be >= 2");
}

JitiState make_state(const JitiConfig& config) {
  JitiState s;
  s.window_k = config.window_k;
  return s;
}

FluctuationResult fluctuation(JitiState& state, double q) {
  if (!std::isfinite(q)) throw NumericError("fluctuation: non-finite q");
  state.history.push_back(q);
  while (static_cast<int>(state.history.size()) > state.window_k) state.history.pop_front();
  double mean = 0;
  for (double v : state.history) mean += v;
  mean /= static_cast<double>(state.history.size());
  state.steps += 1;
  return {mean, std::fabs(q - mean)};
}

int argmax_index(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::string mode_name(GuidanceMode m) {
  switch (m) {
    case GuidanceMode::base_only: return "base";
    case GuidanceMode::full_guidance: return "full";
    case GuidanceMode::jiti: return "jiti";
  }
  return "?";
}

GuidanceMode mode_from_name(const std::string& s) {
  if (s == "base" || s == "base_only") return GuidanceMode::base_only;
  if (s == "full" || s == "full_guidance") return GuidanceMode::full_guidance;
  if (s == "jiti") return GuidanceMode::jiti;
  throw ConfigError("unknown guidance mode: " + s);
}

DecideResult decide(std::span<const double> obs, const policy::PolicyNet& pol,
                    const critic::CriticNet& critic, JitiState& state, const JitiConfig& config,
                    uint64_t seed) {
  int n = config.n_candidates;
  auto cands = policy::sample_candidates(pol, obs, n + 1, seed);
  DecideResult res;
  res.q_default = critic::q_value(critic, obs, cands[0]);
  res.critic_calls = 1;
  FluctuationResult f = fluctuation(state, res.q_default);
  res.mean = f.mean;
  res.delta_q = f.delta_q;
  if (res.delta_q <= config.threshold) {
    res.chunk = std::move(cands[0]);
    res.chosen_index = 0;
    return res;
  }
  std::vector<double> qs(n);
  for (int i = 0; i < n; ++i) qs[i] = critic::q_value(critic, obs, cands[i + 1]);
  res.critic_calls += n;
  int best = argmax_index(qs);
  res.chunk = std::move(cands[best + 1]);
  res.chosen_index = best + 1;
  res.intervened = true;
  state.interventions += 1;
  return res;
}

RolloutResult rollout(const world::TaskSpec& task, GuidanceMode mode, const policy::PolicyNet& pol,
                      const critic::CriticNet* critic, const JitiConfig& config, uint64_t seed) {
  if (mode != GuidanceMode::base_only && critic == nullptr)
    throw ConfigError("rollout: guidance mode requires a critic");
  RolloutResult out;
  demos::Episode& ep = out.episode;
  ep.task_id = task.id;
  ep.seed = seed;
  ep.initial = world::reset(task, derive_seed(seed, "reset"));
  world::WorldState state = ep.initial;
  JitiState jstate = make_state(config);
  uint64_t decide_root = derive_seed(seed, "decide");
  int k = pol.chunk_len;
  int t = 0;
  while (t < task.horizon) {
    numerics::Tensor obs = world::observe(task, state);
    uint64_t dseed = derive_seed(decide_root, static_cast<uint64_t>(out.stats.decisions));
    std::vector<double> chunk;
    DecisionRecord rec;
    rec.decision = out.stats.decisions;
    switch (mode) {
      case GuidanceMode::base_only: {
        chunk = policy::sample_action(pol, obs.data, derive_seed(dseed, uint64_t{0}));
        break;
      }
      case GuidanceMode::full_guidance: {
        auto cands = policy::sample_candidates(pol, obs.data, config.n_candidates + 1, dseed);
        std::vector<double> qs(config.n_candidates);
        for (int i = 0; i < config.n_candidates; ++i)
          qs[i] = critic::q_value(*critic, obs.data, cands[i + 1]);
        out.stats.critic_calls += config.n_candidates;
        int best = argmax_index(qs);
        chunk = std::move(cands[best + 1]);
        rec.intervened = true;
        rec.chosen_index = best + 1;
        out.stats.interventions += 1;
        break;
      }
      case GuidanceMode::jiti: {
        DecideResult res = decide(obs.data, pol, *critic, jstate, config, dseed);
        out.stats.critic_calls += res.critic_calls;
        if (res.intervened) out.stats.interventions += 1;
        rec.q = res.q_default;
        rec.mean = res.mean;
        rec.delta_q = res.delta_q;
        rec.intervened = res.intervened;
        rec.chosen_index = res.chosen_index;
        chunk = std::move(res.chunk);
        break;
      }
    }
    out.stats.decisions += 1;
    out.stats.records.push_back(rec);

    int steps_now = std::min(k, task.horizon - t);
    for (int j = 0; j < steps_now; ++j) {
      demos::EpisodeStep st;
      st.obs = j == 0 ? obs : world::observe(task, state);
      st.action =
          world::denormalize_action(task.constants, chunk.data() + static_cast<size_t>(j) * world::kActionDim);
      auto [next, events] = world::step(task.constants, state, st.action);
      st.state = next;
      st.events = std::move(events);
      state = std::move(next);
      ep.steps.push_back(std::move(st));
      ++t;
    }
  }
  ep.final_obs = world::observe(task, state);
  std::vector<world::WorldState> sb;
  std::vector<world::StepEvents> eb;
  auto ctx = demos::eval_context(ep, task, sb, eb);
  ep.success = itcdsl::evaluate(task.success_expr, ctx);
  ep.elegant = ep.success && itcdsl::evaluate(task.elegance_expr, ctx);
  return out;
}

}  // namespace elegance::jiti
