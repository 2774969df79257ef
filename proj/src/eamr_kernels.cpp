#include "eamr_kernels.hpp"

#include "neurosleep/errors.hpp"

namespace neurosleep::net::detail {

SparseInput expand_sparse(const Raster& s) {
  SparseInput e;
  e.length = static_cast<int>(s.length);
  for (int row = 0; row < 2; ++row) {
    for (std::size_t t = 0; t < s.length; ++t) {
      const double v = s.at(row, t);
      if (v == 0.0) continue;
      if (!s.dense && v != 1.0 && v != -1.0) {
        throw FormatError("polarity_expand: raster value outside {-1, 0, 1}");
      }
      if (v > 0) {
        e.rows[2 * row].emplace_back(static_cast<int>(t), v);
      } else {
        e.rows[2 * row + 1].emplace_back(static_cast<int>(t), -v);
      }
    }
  }
  return e;
}

SparseInput sparse_from_dense(const Mat& m) {
  if (m.rows() != 4) throw InternalError("EAMR input must have 4 rows");
  SparseInput e;
  e.length = static_cast<int>(m.cols());
  for (int c = 0; c < 4; ++c) {
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      if (m(c, t) != 0.0) e.rows[c].emplace_back(static_cast<int>(t), m(c, t));
    }
  }
  return e;
}

void depthwise(const SparseInput& e, const Mat& dw, Mat& out) {
  const int k = static_cast<int>(dw.cols());
  const int half = k / 2;
  const int n = e.length;
  out.setZero(4, n);
  for (int c = 0; c < 4; ++c) {
    double* o = out.row(c).data();
    const double* kern = dw.row(c).data();
    for (const auto& [src, v] : e.rows[c]) {
      // out[t] gathers e[t + j - half]; an input at src reaches t = src - j + half.
      const int j_lo = std::max(0, src + half - (n - 1));
      const int j_hi = std::min(k - 1, src + half);
      for (int j = j_lo; j <= j_hi; ++j) o[src - j + half] += v * kern[j];
    }
  }
}

void depthwise_grad(const SparseInput& e, const Mat& d_out, Mat& grad) {
  const int k = static_cast<int>(grad.cols());
  const int half = k / 2;
  const int n = e.length;
  for (int c = 0; c < 4; ++c) {
    const double* d = d_out.row(c).data();
    double* g = grad.row(c).data();
    for (const auto& [src, v] : e.rows[c]) {
      const int j_lo = std::max(0, src + half - (n - 1));
      const int j_hi = std::min(k - 1, src + half);
      for (int j = j_lo; j <= j_hi; ++j) g[j] += v * d[src - j + half];
    }
  }
}

Vec softmax(const Vec& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) mx = std::max(mx, v[i]);
  }
  if (!std::isfinite(mx)) throw InternalError("softmax: no visible entry");
  Vec out(v.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[i] = std::isfinite(v[i]) ? std::exp(v[i] - mx) : 0.0;
    sum += out[i];
  }
  return out / sum;
}

}  // namespace neurosleep::net::detail
