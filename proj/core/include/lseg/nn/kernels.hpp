#pragma once

#include <concepts>
#include <cstddef>

namespace lseg::nn::kernels {

/// Sliding-window geometry shared by convolution and its transpose.
/// Extents are for the "image" side; out_h/out_w are the window counts.
struct WindowGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;

  /// floor((H + 2p - d(k-1) - 1) / s) + 1, or a non-positive value when the
  /// kernel does not fit.
  long out_h() const noexcept;
  long out_w() const noexcept;
  std::size_t rows() const noexcept { return channels * kernel * kernel; }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(out_h() * out_w()); }
  bool is_pointwise() const noexcept { return kernel == 1 && stride == 1 && padding == 0; }
};

/// image (C x H x W) -> columns (C*k*k x out_h*out_w). Padding reads as zero.
template <std::floating_point T>
void im2col(const T* image, const WindowGeometry& g, T* columns);

/// Adjoint of im2col: scatter-adds columns back into image (not cleared).
template <std::floating_point T>
void col2im(const T* columns, const WindowGeometry& g, T* image);

// Row-major GEMM variants, all accumulating into C.
/// C[m x n] += A[m x k] * B[k x n]
template <std::floating_point T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
/// C[m x n] += A[m x k] * B[n x k]^T
template <std::floating_point T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
/// C[m x n] += A[k x m]^T * B[k x n]
template <std::floating_point T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

}  // namespace lseg::nn::kernels
