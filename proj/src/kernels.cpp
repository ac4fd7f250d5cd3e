#include "mkg/kernels.hpp"

#include <cassert>

namespace mkg::kernels {

namespace {

void prepare(Mat& c, std::size_t rows, std::size_t cols, bool accumulate) {
  if (accumulate) {
    assert(c.rows == rows && c.cols == cols);
    return;
  }
  if (c.rows != rows || c.cols != cols) {
    c = Mat(rows, cols);
  } else {
    c.fill(0.0);
  }
}

}  // namespace

void gemm(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.cols == b.rows);
  prepare(c, a.rows, b.cols, accumulate);
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelThreshold)
  for (long i = 0; i < rows; ++i) {
    double* ci = c.data.data() + static_cast<std::size_t>(i) * m;
    const double* ai = a.data.data() + static_cast<std::size_t>(i) * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_bt(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.cols == b.cols);
  prepare(c, a.rows, b.rows, accumulate);
  const std::size_t n = a.rows, k = a.cols, m = b.rows;
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelThreshold)
  for (long i = 0; i < rows; ++i) {
    const double* ai = a.data.data() + static_cast<std::size_t>(i) * k;
    double* ci = c.data.data() + static_cast<std::size_t>(i) * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.data.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

void gemm_at(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  assert(a.rows == b.rows);
  prepare(c, a.cols, b.cols, accumulate);
  const std::size_t n = a.cols, k = a.rows, m = b.cols;
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelThreshold)
  for (long i = 0; i < rows; ++i) {
    double* ci = c.data.data() + static_cast<std::size_t>(i) * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.data[p * n + static_cast<std::size_t>(i)];
      if (av == 0.0) continue;
      const double* bp = b.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

void matvec(const Mat& rows, std::span<const double> q, std::span<double> out) {
  assert(rows.cols == q.size() && rows.rows == out.size());
  const std::size_t d = rows.cols;
  const long n = static_cast<long>(rows.rows);
#pragma omp parallel for schedule(static) if (rows.rows * d > kParallelThreshold)
  for (long i = 0; i < n; ++i) {
    const double* r = rows.data.data() + static_cast<std::size_t>(i) * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += r[j] * q[j];
    out[static_cast<std::size_t>(i)] = s;
  }
}

namespace reference {

void gemm(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  prepare(c, a.rows, b.cols, accumulate);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += a(i, p) * b(p, j);
      c(i, j) += s;
    }
}

void gemm_bt(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  prepare(c, a.rows, b.rows, accumulate);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += a(i, p) * b(j, p);
      c(i, j) += s;
    }
}

void gemm_at(const Mat& a, const Mat& b, Mat& c, bool accumulate) {
  prepare(c, a.cols, b.cols, accumulate);
  for (std::size_t i = 0; i < a.cols; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.rows; ++p) s += a(p, i) * b(p, j);
      c(i, j) += s;
    }
}

void matvec(const Mat& rows, std::span<const double> q, std::span<double> out) {
  for (std::size_t i = 0; i < rows.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < rows.cols; ++j) s += rows(i, j) * q[j];
    out[i] = s;
  }
}

}  // namespace reference

}  // namespace mkg::kernels
