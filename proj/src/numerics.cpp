#include <cmath>
#include <numeric>

#include "elegance/adamw.hpp"
#include "elegance/mlp.hpp"
#include "elegance/parallel.hpp"
#include "elegance/tensor.hpp"

namespace elegance {

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace elegance

namespace elegance::numerics {

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (numel() != static_cast<int64_t>(data.size()))
    throw ConfigError("tensor shape/data mismatch");
}

Tensor Tensor::zeros(std::vector<int> shape) {
  int64_t n = 1;
  for (int s : shape) n *= s;
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape = {static_cast<int>(values.size())};
  t.data = std::move(values);
  return t;
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int s : shape) n *= s;
  return shape.empty() ? static_cast<int64_t>(data.size()) : n;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string activation_name(Activation a) {
  return a == Activation::tanh_fn ? "tanh" : "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh_fn;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation: " + name);
}

std::vector<int> MlpParams::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().w.cols());
  for (const auto& l : layers) d.push_back(l.w.rows());
  return d;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
  for (size_t i = 0; i < layers.size(); ++i) {
    auto& w = layers[i].w.data;
    const auto& ow = other.layers[i].w.data;
    for (size_t j = 0; j < w.size(); ++j) w[j] += scale * ow[j];
    auto& b = layers[i].b.data;
    const auto& ob = other.layers[i].b.data;
    for (size_t j = 0; j < b.size(); ++j) b[j] += scale * ob[j];
  }
}

void MlpGrads::scale(double s) {
  for (auto& l : layers) {
    for (double& v : l.w.data) v *= s;
    for (double& v : l.b.data) v *= s;
  }
}

bool MlpGrads::all_finite() const {
  for (const auto& l : layers)
    if (!l.w.all_finite() || !l.b.all_finite()) return false;
  return true;
}

MlpParams make_mlp(const std::vector<int>& dims, Activation act, uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least input and output dims");
  Rng rng(seed);
  MlpParams p;
  p.activation = act;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    int in = dims[i], out = dims[i + 1];
    if (in < 1 || out < 1) throw ConfigError("mlp layer dims must be positive");
    DenseLayer l;
    l.w = Tensor::zeros({out, in});
    l.b = Tensor::zeros({out});
    double scale = std::sqrt(2.0 / (in + out));
    for (double& v : l.w.data) v = scale * rng.normal();
    p.layers.push_back(std::move(l));
  }
  return p;
}

MlpGrads zeros_like(const MlpParams& params) {
  MlpGrads g;
  for (const auto& l : params.layers) {
    DenseLayer z;
    z.w = Tensor::zeros(l.w.shape);
    z.b = Tensor::zeros(l.b.shape);
    g.layers.push_back(std::move(z));
  }
  return g;
}

int64_t param_count(const MlpParams& params) {
  int64_t n = 0;
  for (const auto& l : params.layers) n += l.w.numel() + l.b.numel();
  return n;
}

void for_each_param(MlpParams& params, const std::function<void(double&)>& fn) {
  for (auto& l : params.layers) {
    for (double& v : l.w.data) fn(v);
    for (double& v : l.b.data) fn(v);
  }
}

void for_each_param(const MlpParams& params, const std::function<void(double)>& fn) {
  for (const auto& l : params.layers) {
    for (double v : l.w.data) fn(v);
    for (double v : l.b.data) fn(v);
  }
}

static double activate(Activation a, double x) {
  return a == Activation::tanh_fn ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

static double activate_grad_from_pre(Activation a, double pre) {
  if (a == Activation::tanh_fn) {
    double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  return pre > 0.0 ? 1.0 : 0.0;
}

Tensor mlp_forward(const MlpParams& params, const Tensor& input, ForwardTrace* trace) {
  if (static_cast<int>(input.data.size()) != params.input_dim())
    throw ConfigError("mlp_forward: input length " + std::to_string(input.data.size()) +
                      " != first-layer input dim " + std::to_string(params.input_dim()));
  if (trace) {
    trace->pre.clear();
    trace->post.clear();
    trace->post.push_back(input);
  }
  Tensor cur = input;
  for (size_t li = 0; li < params.layers.size(); ++li) {
    const DenseLayer& l = params.layers[li];
    int out = l.w.rows(), in = l.w.cols();
    Tensor next = Tensor::zeros({out});
    for (int r = 0; r < out; ++r) {
      double acc = l.b.data[r];
      const double* wrow = l.w.data.data() + static_cast<size_t>(r) * in;
      for (int c = 0; c < in; ++c) acc += wrow[c] * cur.data[c];
      next.data[r] = acc;
    }
    if (trace) trace->pre.push_back(next);
    bool last = li + 1 == params.layers.size();
    if (!last)
      for (double& v : next.data) v = activate(params.activation, v);
    if (trace) trace->post.push_back(next);
    cur = std::move(next);
  }
  if (!cur.all_finite()) throw NumericError("mlp_forward produced non-finite output");
  return cur;
}

BackwardResult mlp_backward(const MlpParams& params, const Tensor& input, const Tensor& upstream) {
  ForwardTrace trace;
  mlp_forward(params, input, &trace);
  return mlp_backward(params, trace, upstream);
}

BackwardResult mlp_backward(const MlpParams& params, const ForwardTrace& trace, const Tensor& upstream) {
  if (static_cast<int>(upstream.data.size()) != params.output_dim())
    throw ConfigError("mlp_backward: upstream length != output dim");
  BackwardResult res;
  res.param_grads = zeros_like(params);
  std::vector<double> delta = upstream.data;  // dL/d(pre) of current layer
  for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
    const DenseLayer& l = params.layers[li];
    int out = l.w.rows(), in = l.w.cols();
    bool last = li + 1 == static_cast<int>(params.layers.size());
    if (!last)
      for (int r = 0; r < out; ++r)
        delta[r] *= activate_grad_from_pre(params.activation, trace.pre[li].data[r]);
    const std::vector<double>& below = trace.post[li].data;
    DenseLayer& g = res.param_grads.layers[li];
    for (int r = 0; r < out; ++r) {
      g.b.data[r] += delta[r];
      double* grow = g.w.data.data() + static_cast<size_t>(r) * in;
      for (int c = 0; c < in; ++c) grow[c] += delta[r] * below[c];
    }
    std::vector<double> prev(in, 0.0);
    for (int r = 0; r < out; ++r) {
      const double* wrow = l.w.data.data() + static_cast<size_t>(r) * in;
      for (int c = 0; c < in; ++c) prev[c] += delta[r] * wrow[c];
    }
    delta = std::move(prev);
  }
  res.input_grad = Tensor::vector(std::move(delta));
  if (!res.param_grads.all_finite() || !res.input_grad.all_finite())
    throw NumericError("mlp_backward produced non-finite gradients");
  return res;
}

void accumulate(MlpGrads& into, const MlpGrads& grad, double scale) {
  into.add_scaled(grad, scale);
}

MlpGrads finite_diff_grad(const std::function<double(const MlpParams&)>& loss_fn, const MlpParams& params,
                          double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
  MlpParams probe = params;
  MlpGrads grads = zeros_like(params);
  for (size_t li = 0; li < probe.layers.size(); ++li) {
    auto diff_array = [&](std::vector<double>& arr, std::vector<double>& out) {
      for (size_t j = 0; j < arr.size(); ++j) {
        double saved = arr[j];
        arr[j] = saved + eps;
        double up = loss_fn(probe);
        arr[j] = saved - eps;
        double down = loss_fn(probe);
        arr[j] = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
          throw NumericError("finite_diff_grad: non-finite loss");
        out[j] = (up - down) / (2.0 * eps);
      }
    };
    diff_array(probe.layers[li].w.data, grads.layers[li].w.data);
    diff_array(probe.layers[li].b.data, grads.layers[li].b.data);
  }
  return grads;
}

AdamWState make_adamw_state(const MlpParams& params, AdamWHyper hyper) {
  AdamWState st;
  st.first_moment = zeros_like(params);
  st.second_moment = zeros_like(params);
  st.hyper = hyper;
  return st;
}

void adamw_step(MlpParams& params, const MlpGrads& grads, AdamWState& state) {
  const AdamWHyper& h = state.hyper;
  state.step += 1;
  double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (size_t li = 0; li < params.layers.size(); ++li) {
    auto update_array = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                            std::vector<double>& v) {
      for (size_t j = 0; j < w.size(); ++j) {
        m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
        v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
        double mhat = m[j] / bc1;
        double vhat = v[j] / bc2;
        double next = w[j] * (1.0 - h.lr * h.weight_decay) - h.lr * mhat / (std::sqrt(vhat) + h.eps);
        if (!std::isfinite(next)) throw NumericError("adamw_step produced non-finite weight");
        w[j] = next;
      }
    };
    update_array(params.layers[li].w.data, grads.layers[li].w.data, state.first_moment.layers[li].w.data,
                 state.second_moment.layers[li].w.data);
    update_array(params.layers[li].b.data, grads.layers[li].b.data, state.first_moment.layers[li].b.data,
                 state.second_moment.layers[li].b.data);
  }
}

}  // namespace elegance::numerics
