#include "lseg/nn/kernels.hpp"

#include <algorithm>
#include <cstring>

namespace lseg::nn::kernels {

namespace {

long window_count(std::size_t extent, const WindowGeometry& g) {
  const long span = static_cast<long>(g.dilation * (g.kernel - 1) + 1);
  const long padded = static_cast<long>(extent + 2 * g.padding);
  if (padded < span) return 0;
  return (padded - span) / static_cast<long>(g.stride) + 1;
}

}  // namespace

long WindowGeometry::out_h() const noexcept { return window_count(height, *this); }
long WindowGeometry::out_w() const noexcept { return window_count(width, *this); }

template <std::floating_point T>
void im2col(const T* image, const WindowGeometry& g, T* columns) {
  const long oh = g.out_h();
  const long ow = g.out_w();
  const long h = static_cast<long>(g.height);
  const long w = static_cast<long>(g.width);
  const long pad = static_cast<long>(g.padding);
  const long stride = static_cast<long>(g.stride);
  const long dil = static_cast<long>(g.dilation);
  const long k = static_cast<long>(g.kernel);

  T* dst = columns;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = image + c * g.height * g.width;
    for (long ki = 0; ki < k; ++ki) {
      for (long kj = 0; kj < k; ++kj) {
        for (long oy = 0; oy < oh; ++oy) {
          const long iy = oy * stride - pad + ki * dil;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            dst += ow;
            continue;
          }
          const T* row = plane + iy * w;
          if (stride == 1) {
            // Contiguous run with zero fringes.
            const long x0 = kj * dil - pad;
            for (long ox = 0; ox < ow; ++ox) {
              const long ix = x0 + ox;
              dst[ox] = (ix >= 0 && ix < w) ? row[ix] : T(0);
            }
          } else {
            for (long ox = 0; ox < ow; ++ox) {
              const long ix = ox * stride - pad + kj * dil;
              dst[ox] = (ix >= 0 && ix < w) ? row[ix] : T(0);
            }
          }
          dst += ow;
        }
      }
    }
  }
}

template <std::floating_point T>
void col2im(const T* columns, const WindowGeometry& g, T* image) {
  const long oh = g.out_h();
  const long ow = g.out_w();
  const long h = static_cast<long>(g.height);
  const long w = static_cast<long>(g.width);
  const long pad = static_cast<long>(g.padding);
  const long stride = static_cast<long>(g.stride);
  const long dil = static_cast<long>(g.dilation);
  const long k = static_cast<long>(g.kernel);

  const T* src = columns;
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = image + c * g.height * g.width;
    for (long ki = 0; ki < k; ++ki) {
      for (long kj = 0; kj < k; ++kj) {
        for (long oy = 0; oy < oh; ++oy) {
          const long iy = oy * stride - pad + ki * dil;
          if (iy < 0 || iy >= h) {
            src += ow;
            continue;
          }
          T* row = plane + iy * w;
          for (long ox = 0; ox < ow; ++ox) {
            const long ix = ox * stride - pad + kj * dil;
            if (ix >= 0 && ix < w) row[ix] += src[ox];
          }
          src += ow;
        }
      }
    }
  }
}

template <std::floating_point T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <std::floating_point T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  constexpr std::size_t kLanes = 8;
  const std::size_t body = k - k % kLanes;
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T lanes[kLanes] = {};
      for (std::size_t p = 0; p < body; p += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += arow[p + l] * brow[p + l];
      }
      T acc = T(0);
      for (std::size_t l = 0; l < kLanes; ++l) acc += lanes[l];
      for (std::size_t p = body; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

template <std::floating_point T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

#define LSEG_INSTANTIATE(T)                                                                           \
  template void im2col<T>(const T*, const WindowGeometry&, T*);                                       \
  template void col2im<T>(const T*, const WindowGeometry&, T*);                                       \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);            \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);            \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);

LSEG_INSTANTIATE(float)
LSEG_INSTANTIATE(double)
#undef LSEG_INSTANTIATE

}  // namespace lseg::nn::kernels
