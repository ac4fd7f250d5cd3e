#pragma once

#include <span>

#include "mkg/tensor.hpp"

// Dense linear-algebra kernels used by the encoders and the embedding index.
// The top-level functions are OpenMP-parallel over output rows; the
// `reference` namespace holds plain serial loops kept for testing and for the
// benchmark. Each output element is summed in ascending inner-index order
// regardless of thread count, so parallel results do not depend on the
// number of threads.
namespace mkg::kernels {

// C = A * B   (or C += A * B when accumulate)
void gemm(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
// C = A * B^T
void gemm_bt(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
// C = A^T * B
void gemm_at(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
// out[i] = dot(rows.row(i), q)
void matvec(const Mat& rows, std::span<const double> q, std::span<double> out);

namespace reference {
void gemm(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
void gemm_bt(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
void gemm_at(const Mat& a, const Mat& b, Mat& c, bool accumulate = false);
void matvec(const Mat& rows, std::span<const double> q, std::span<double> out);
}  // namespace reference

// Work (multiply-adds) below which kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

}  // namespace mkg::kernels
