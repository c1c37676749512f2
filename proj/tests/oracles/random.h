#pragma once

#include <cstdint>
#include <vector>

#include "gvmt/numerics/rng.h"
#include "gvmt/numerics/tensor.h"

namespace gvmt::testing {

inline num::Tensor random_matrix(num::Rng& rng, std::size_t rows, std::size_t cols, bool requires_grad = false,
                                 double scale = 1.0) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return num::Tensor::from_data({rows, cols}, std::move(v), requires_grad);
}

// Plain nested-vector matrix used by the explicit-loop oracles.
using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const num::Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline Mat naive_matmul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t p = 0; p < b.size(); ++p) out[i][j] += a[i][p] * b[p][j];
  return out;
}

}  // namespace gvmt::testing
