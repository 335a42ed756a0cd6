#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "elegance/common.hpp"
#include "elegance/tensor.hpp"

namespace elegance::numerics {

enum class Activation { tanh_fn, relu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
  Tensor w;  // [out x in]
  Tensor b;  // [out]
  bool operator==(const DenseLayer&) const = default;
};

// Plain MLP: hidden layers share one activation, output layer is linear.
struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::tanh_fn;

  int input_dim() const { return layers.empty() ? 0 : layers.front().w.cols(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows(); }
  std::vector<int> dims() const;
  bool operator==(const MlpParams&) const = default;
};

// Same layer structure as MlpParams, used for gradients and optimizer moments.
struct MlpGrads {
  std::vector<DenseLayer> layers;

  void add_scaled(const MlpGrads& other, double scale);
  void scale(double s);
  bool all_finite() const;
};

MlpParams make_mlp(const std::vector<int>& dims, Activation act, uint64_t seed);
MlpGrads zeros_like(const MlpParams& params);

int64_t param_count(const MlpParams& params);

// Iterates every scalar parameter in a fixed order (layer, weight row-major,
// then bias); the same order is used for gradients, so index i always refers
// to the same coordinate.
void for_each_param(MlpParams& params, const std::function<void(double&)>& fn);
void for_each_param(const MlpParams& params, const std::function<void(double)>& fn);

struct ForwardTrace {
  std::vector<Tensor> pre;    // pre-activation per layer
  std::vector<Tensor> post;   // post[0] = input, post[i] = activated output of layer i-1
};

Tensor mlp_forward(const MlpParams& params, const Tensor& input, ForwardTrace* trace = nullptr);

struct BackwardResult {
  MlpGrads param_grads;
  Tensor input_grad;
};

// Gradients of a scalar loss given d(loss)/d(output) = upstream.
BackwardResult mlp_backward(const MlpParams& params, const Tensor& input, const Tensor& upstream);
BackwardResult mlp_backward(const MlpParams& params, const ForwardTrace& trace, const Tensor& upstream);

// Accumulates `grad` into `into` without allocating; both must match `params`.
void accumulate(MlpGrads& into, const MlpGrads& grad, double scale = 1.0);

// Central-difference oracle: (f(p+eps) - f(p-eps)) / (2 eps) per coordinate.
// Test-side reference for every analytic gradient in the repo.
MlpGrads finite_diff_grad(const std::function<double(const MlpParams&)>& loss_fn, const MlpParams& params,
                          double eps);

}  // namespace elegance::numerics
