#pragma once

#include <cassert>
#include <span>
#include <vector>

namespace riskdp {

/// Dense row-major matrix of doubles. Small helper used for transition
/// tables, policies, logits and per-state statistic vectors.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<std::size_t>(i) * cols + j];
  }

  std::span<double> row(int i) {
    return {data.data() + static_cast<std::size_t>(i) * cols,
            static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols,
            static_cast<std::size_t>(cols)};
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  assert(a.same_shape(b));
  double d = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    double e = a.data[i] - b.data[i];
    if (e < 0) e = -e;
    if (e > d) d = e;
  }
  return d;
}

}  // namespace riskdp
