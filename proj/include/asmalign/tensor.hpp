#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "asmalign/util.hpp"

namespace asmalign {

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg) : Error("ShapeMismatch: " + msg) {}
};

// Dense row-major tensor. Rank is 1 or 2 in practice; scalars are [1,1].
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
      : shape{rows, cols}, data(rows * cols, fill) {}

  static Tensor scalar(T v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

template <typename T>
Tensor<T> random_normal(std::size_t rows, std::size_t cols, T stddev, Rng& rng) {
  Tensor<T> t(rows, cols);
  for (auto& v : t.data) v = static_cast<T>(rng.normal()) * stddev;
  return t;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

}  // namespace asmalign
