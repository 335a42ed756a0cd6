#pragma once

#include <cstdint>
#include <vector>

namespace elegance::numerics {

// Dense row-major tensor of 64-bit reals. Everything learned in this repo
// lives in these; shapes are small enough that value semantics are fine.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor zeros(std::vector<int> shape);
  static Tensor vector(std::vector<double> values);

  int64_t numel() const;
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  bool all_finite() const;
  bool operator==(const Tensor&) const = default;
};

}  // namespace elegance::numerics
