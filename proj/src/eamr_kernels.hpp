#pragma once

// Per-epoch kernels shared by the inference path and the batched trainer.

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "neurosleep/params.hpp"
#include "neurosleep/s2e.hpp"

namespace neurosleep::net::detail {

// Nonzero entries of the polarity-expanded input, row by row.
struct SparseInput {
  std::array<std::vector<std::pair<int, double>>, 4> rows;
  int length = 0;
};

SparseInput expand_sparse(const Raster& s);
SparseInput sparse_from_dense(const Mat& e);

// out(c, t) = sum_j dw(c, j) * e(c, t + j - k/2), zero padded.
void depthwise(const SparseInput& e, const Mat& dw, Mat& out);
// grad(c, j) += sum_t e(c, t + j - k/2) * d_out(c, t)
void depthwise_grad(const SparseInput& e, const Mat& d_out, Mat& grad);

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double gelu(double y) { return 0.5 * y * (1.0 + std::erf(y * kInvSqrt2)); }

inline double gelu(double y, double& deriv) {
  const double cdf = 0.5 * (1.0 + std::erf(y * kInvSqrt2));
  deriv = cdf + y * kInvSqrt2Pi * std::exp(-0.5 * y * y);
  return y * cdf;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Softmax of v restricted to finite entries; -inf entries get weight 0.
Vec softmax(const Vec& v);

}  // namespace neurosleep::net::detail
