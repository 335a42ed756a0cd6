#pragma once

#include <cstdint>

#include "elegance/mlp.hpp"

namespace elegance::numerics {

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamWState {
  MlpGrads first_moment;
  MlpGrads second_moment;
  int64_t step = 0;
  AdamWHyper hyper;
};

AdamWState make_adamw_state(const MlpParams& params, AdamWHyper hyper);

// Bias-corrected update with decoupled decay: the decay term scales the
// weight directly and never enters the moment accumulators, so zero
// gradients shrink weights by exactly (1 - lr*wd) per step.
void adamw_step(MlpParams& params, const MlpGrads& grads, AdamWState& state);

}  // namespace elegance::numerics
