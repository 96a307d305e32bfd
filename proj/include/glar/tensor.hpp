#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "glar/errors.hpp"

namespace glar::ad {

// Dense row-major tensor of doubles. Rank 2 in practice: scalars are {1,1},
// column vectors {n,1}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel() != data.size()) throw NumericError("tensor: shape does not match data length");
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor colvec(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor({n, 1}, std::move(v));
  }
  static Tensor matrix(int r, int c, std::vector<double> v) { return Tensor({r, c}, std::move(v)); }
  static Tensor zeros(std::vector<int> s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static Tensor full(std::vector<int> s, double v) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return Tensor(std::move(s), std::vector<double>(n, v));
  }
  static Tensor identity(int d) {
    Tensor t = zeros({d, d});
    for (int i = 0; i < d; ++i) t.data[static_cast<std::size_t>(i) * d + i] = 1.0;
    return t;
  }

  std::size_t numel() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return shape.empty() ? (data.empty() ? 0 : 1) : n;
  }
  bool is_scalar() const { return numel() == 1; }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double scalar_value() const {
    if (!is_scalar()) throw NumericError("tensor: scalar_value on non-scalar");
    return data[0];
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace glar::ad
