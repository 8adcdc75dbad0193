// Dense row-major tensor, rank 1 or 2, templated on the scalar so the
// gradient checker can instantiate the whole graph in double precision.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "motionlm/common.hpp"

namespace motionlm::nn {

template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), fill);
  }
  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != numel_of(shape))
      throw ConfigError("tensor shape/data mismatch");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return rank() == 2 ? shape[1] : 1; }

  T& operator()(int i) { return data[static_cast<size_t>(i)]; }
  const T& operator()(int i) const { return data[static_cast<size_t>(i)]; }
  T& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  const T& operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }
  static TensorT full(std::vector<int> s, T v) { return TensorT(std::move(s), v); }
  static TensorT randn(std::vector<int> s, Rng& rng, double stddev = 1.0) {
    TensorT t(std::move(s));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
    return t;
  }

  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<Mat> mat() { return {data.data(), rows(), cols()}; }
  Eigen::Map<const Mat> mat() const { return {data.data(), rows(), cols()}; }
  // 2D view with an explicit shape, for rank-1 tensors used as row/col vectors.
  Eigen::Map<Mat> mat(int r, int c) { return {data.data(), r, c}; }
  Eigen::Map<const Mat> mat(int r, int c) const { return {data.data(), r, c}; }
};

using Tensor = TensorT<float>;

}  // namespace motionlm::nn
