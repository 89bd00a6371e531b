#include "lseg/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lseg::nn {

namespace {

template <std::floating_point T>
void require_rank4(const BasicTensor<T>& x, const char* who) {
  if (x.rank() != 4) throw ShapeError(std::string(who) + ": expected NxCxHxW input, got " + to_string(x.shape()));
}

template <std::floating_point T>
void require_even(const BasicTensor<T>& x, const char* who) {
  require_rank4(x, who);
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw ShapeError(std::string(who) + ": spatial extents must be even, got " + to_string(x.shape()) +
                     "; pad or crop the input to an even size");
  }
}

template <std::floating_point T>
T stable_sigmoid(T v) {
  constexpr T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  T s;
  if (v >= T(0)) {
    s = T(1) / (T(1) + std::exp(-v));
  } else {
    const T e = std::exp(v);
    s = e / (T(1) + e);
  }
  return std::clamp(s, lo, hi);
}

}  // namespace

// ------------------------------------------------------------ activations

template <std::floating_point T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

template <std::floating_point T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
  return out;
}

template <std::floating_point T>
typename ReLU<T>::TensorT ReLU<T>::forward(const TensorT& x) {
  input_ = x;
  return relu(x);
}
template <std::floating_point T>
typename ReLU<T>::TensorT ReLU<T>::infer(const TensorT& x) const {
  return relu(x);
}
template <std::floating_point T>
typename ReLU<T>::TensorT ReLU<T>::backward(const TensorT& grad_out) {
  require_same_shape(grad_out.shape(), input_.shape(), "relu backward");
  TensorT g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = input_[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <std::floating_point T>
typename Sigmoid<T>::TensorT Sigmoid<T>::forward(const TensorT& x) {
  output_ = sigmoid(x);
  return output_;
}
template <std::floating_point T>
typename Sigmoid<T>::TensorT Sigmoid<T>::infer(const TensorT& x) const {
  return sigmoid(x);
}
template <std::floating_point T>
typename Sigmoid<T>::TensorT Sigmoid<T>::backward(const TensorT& grad_out) {
  require_same_shape(grad_out.shape(), output_.shape(), "sigmoid backward");
  TensorT g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * output_[i] * (T(1) - output_[i]);
  return g;
}

namespace {

// Iterates (outer, inner) pairs of a tensor whose axis 1 is the class axis.
struct ClassLayout {
  std::size_t outer, classes, inner;
};

template <std::floating_point T>
ClassLayout class_layout(const BasicTensor<T>& x) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw ShapeError("softmax: expected NxC or NxCxHxW input, got " + to_string(x.shape()));
  }
  const std::size_t inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  return {x.dim(0), x.dim(1), inner};
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  const auto l = class_layout(x);
  BasicTensor<T> out(x.shape());
  for (std::size_t n = 0; n < l.outer; ++n) {
    for (std::size_t s = 0; s < l.inner; ++s) {
      const std::size_t base = n * l.classes * l.inner + s;
      T peak = x[base];
      for (std::size_t c = 1; c < l.classes; ++c) peak = std::max(peak, x[base + c * l.inner]);
      T total = T(0);
      for (std::size_t c = 0; c < l.classes; ++c) {
        const T e = std::exp(x[base + c * l.inner] - peak);
        out[base + c * l.inner] = e;
        total += e;
      }
      for (std::size_t c = 0; c < l.classes; ++c) out[base + c * l.inner] /= total;
    }
  }
  return out;
}

template <std::floating_point T>
typename Softmax<T>::TensorT Softmax<T>::forward(const TensorT& x) {
  output_ = softmax(x);
  return output_;
}
template <std::floating_point T>
typename Softmax<T>::TensorT Softmax<T>::infer(const TensorT& x) const {
  return softmax(x);
}
template <std::floating_point T>
typename Softmax<T>::TensorT Softmax<T>::backward(const TensorT& grad_out) {
  require_same_shape(grad_out.shape(), output_.shape(), "softmax backward");
  const auto l = class_layout(output_);
  TensorT g(grad_out.shape());
  for (std::size_t n = 0; n < l.outer; ++n) {
    for (std::size_t s = 0; s < l.inner; ++s) {
      const std::size_t base = n * l.classes * l.inner + s;
      T inner = T(0);
      for (std::size_t c = 0; c < l.classes; ++c) inner += grad_out[base + c * l.inner] * output_[base + c * l.inner];
      for (std::size_t c = 0; c < l.classes; ++c) {
        const std::size_t i = base + c * l.inner;
        g[i] = output_[i] * (grad_out[i] - inner);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------- pooling

template <std::floating_point T>
typename MaxPool2d<T>::TensorT MaxPool2d<T>::pool(const TensorT& x, std::vector<std::size_t>* argmax) const {
  require_even(x, "maxpool2");
  const std::size_t n = x.batch(), c = x.channels(), h = x.height(), w = x.width();
  const std::size_t oh = h / 2, ow = w / 2;
  TensorT out({n, c, oh, ow});
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const std::size_t plane = nc * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xcol = 0; xcol < ow; ++xcol, ++o) {
        const std::size_t taps[4] = {plane + (2 * y) * w + 2 * xcol, plane + (2 * y) * w + 2 * xcol + 1,
                                     plane + (2 * y + 1) * w + 2 * xcol, plane + (2 * y + 1) * w + 2 * xcol + 1};
        std::size_t best = taps[0];
        for (int t = 1; t < 4; ++t) {
          if (x[taps[t]] > x[best]) best = taps[t];
        }
        out[o] = x[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return out;
}

template <std::floating_point T>
typename MaxPool2d<T>::TensorT MaxPool2d<T>::forward(const TensorT& x) {
  input_shape_ = x.shape();
  return pool(x, &argmax_);
}
template <std::floating_point T>
typename MaxPool2d<T>::TensorT MaxPool2d<T>::infer(const TensorT& x) const {
  return pool(x, nullptr);
}
template <std::floating_point T>
typename MaxPool2d<T>::TensorT MaxPool2d<T>::backward(const TensorT& grad_out) {
  if (grad_out.size() != argmax_.size()) throw ShapeError("maxpool2 backward: gradient does not match last forward");
  TensorT g(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) g[argmax_[o]] += grad_out[o];
  return g;
}

template <std::floating_point T>
typename AvgPool2d<T>::TensorT AvgPool2d<T>::infer(const TensorT& x) const {
  require_even(x, "avgpool2");
  const std::size_t h = x.height(), w = x.width(), oh = h / 2, ow = w / 2;
  TensorT out({x.batch(), x.channels(), oh, ow});
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < x.batch() * x.channels(); ++nc) {
    const T* p = x.data() + nc * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xc = 0; xc < ow; ++xc, ++o) {
        const T* r0 = p + 2 * y * w + 2 * xc;
        const T* r1 = r0 + w;
        out[o] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
      }
    }
  }
  return out;
}
template <std::floating_point T>
typename AvgPool2d<T>::TensorT AvgPool2d<T>::forward(const TensorT& x) {
  input_shape_ = x.shape();
  return infer(x);
}
template <std::floating_point T>
typename AvgPool2d<T>::TensorT AvgPool2d<T>::backward(const TensorT& grad_out) {
  TensorT g(input_shape_);
  const std::size_t h = input_shape_[2], w = input_shape_[3], oh = h / 2, ow = w / 2;
  require_same_shape(grad_out.shape(), Shape{input_shape_[0], input_shape_[1], oh, ow}, "avgpool2 backward");
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < input_shape_[0] * input_shape_[1]; ++nc) {
    T* p = g.data() + nc * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xc = 0; xc < ow; ++xc, ++o) {
        const T v = grad_out[o] * T(0.25);
        T* r0 = p + 2 * y * w + 2 * xc;
        T* r1 = r0 + w;
        r0[0] += v;
        r0[1] += v;
        r1[0] += v;
        r1[1] += v;
      }
    }
  }
  return g;
}

template <std::floating_point T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  require_rank4(x, "global_avg_pool");
  const std::size_t plane = x.height() * x.width();
  if (plane == 0) throw ShapeError("global_avg_pool: empty spatial extent");
  BasicTensor<T> out({x.batch(), x.channels()});
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    double acc = 0.0;
    const T* p = x.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    out[nc] = static_cast<T>(acc / static_cast<double>(plane));
  }
  return out;
}

template <std::floating_point T>
typename GlobalAvgPool<T>::TensorT GlobalAvgPool<T>::forward(const TensorT& x) {
  input_shape_ = x.shape();
  return global_avg_pool(x);
}
template <std::floating_point T>
typename GlobalAvgPool<T>::TensorT GlobalAvgPool<T>::infer(const TensorT& x) const {
  return global_avg_pool(x);
}
template <std::floating_point T>
typename GlobalAvgPool<T>::TensorT GlobalAvgPool<T>::backward(const TensorT& grad_out) {
  require_same_shape(grad_out.shape(), Shape{input_shape_[0], input_shape_[1]}, "global_avg_pool backward");
  const std::size_t plane = input_shape_[2] * input_shape_[3];
  const T inv = T(1) / static_cast<T>(plane);
  TensorT g(input_shape_);
  for (std::size_t nc = 0; nc < grad_out.size(); ++nc) {
    std::fill(g.data() + nc * plane, g.data() + (nc + 1) * plane, grad_out[nc] * inv);
  }
  return g;
}

// ------------------------------------------------------------- batch norm

template <std::floating_point T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(Shape{channels}, T(1)),
      beta_(Shape{channels}),
      running_mean_(Shape{channels}),
      running_var_(Shape{channels}, T(1)),
      gamma_grad_(Shape{channels}),
      beta_grad_(Shape{channels}) {
  if (channels == 0) throw std::invalid_argument("batchnorm: channel count must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("batchnorm: eps must be positive");
}

template <std::floating_point T>
typename BatchNorm2d<T>::TensorT BatchNorm2d<T>::infer(const TensorT& x) const {
  require_rank4(x, "batchnorm");
  if (x.channels() != channels_) {
    throw ShapeError("batchnorm: expected " + std::to_string(channels_) + " channels, got " + to_string(x.shape()));
  }
  const std::size_t plane = x.height() * x.width();
  TensorT out(x.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_);
    const T a = static_cast<T>(gamma_[c] * inv);
    const T b = static_cast<T>(beta_[c] - gamma_[c] * running_mean_[c] * inv);
    for (std::size_t n = 0; n < x.batch(); ++n) {
      const T* src = x.data() + (n * channels_ + c) * plane;
      T* dst = out.data() + (n * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = a * src[i] + b;
    }
  }
  return out;
}

template <std::floating_point T>
typename BatchNorm2d<T>::TensorT BatchNorm2d<T>::forward(const TensorT& x) {
  require_rank4(x, "batchnorm");
  if (x.channels() != channels_) {
    throw ShapeError("batchnorm: expected " + std::to_string(channels_) + " channels, got " + to_string(x.shape()));
  }
  const std::size_t n = x.batch();
  const std::size_t plane = x.height() * x.width();
  const std::size_t count = n * plane;
  if (count == 0) throw ShapeError("batchnorm: no elements per channel");

  used_batch_stats_ = this->training();
  normalized_ = TensorT(x.shape());
  inv_std_.assign(channels_, 0.0);
  TensorT out(x.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double mu, var;
    if (used_batch_stats_) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.data() + (b * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mu = s / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.data() + (b * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mu);
      running_var_[c] = static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * var);
    } else {
      mu = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    // Evaluation mode uses the same folded affine map as infer().
    const T a = static_cast<T>(gamma_[c] * inv);
    const T shift = static_cast<T>(beta_[c] - gamma_[c] * mu * inv);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T xh = static_cast<T>((x[base + i] - mu) * inv);
        normalized_[base + i] = xh;
        out[base + i] = used_batch_stats_ ? gamma_[c] * xh + beta_[c] : a * x[base + i] + shift;
      }
    }
  }
  return out;
}

template <std::floating_point T>
typename BatchNorm2d<T>::TensorT BatchNorm2d<T>::backward(const TensorT& grad_out) {
  require_same_shape(grad_out.shape(), normalized_.shape(), "batchnorm backward");
  const std::size_t n = grad_out.batch();
  const std::size_t plane = grad_out.height() * grad_out.width();
  const double count = static_cast<double>(n * plane);
  TensorT g(grad_out.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += grad_out[base + i];
        sum_dy_xh += static_cast<double>(grad_out[base + i]) * normalized_[base + i];
      }
    }
    gamma_grad_[c] += static_cast<T>(sum_dy_xh);
    beta_grad_[c] += static_cast<T>(sum_dy);
    const double gscale = gamma_[c] * inv_std_[c];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (used_batch_stats_) {
          g[base + i] = static_cast<T>(gscale * (grad_out[base + i] - sum_dy / count -
                                                 normalized_[base + i] * sum_dy_xh / count));
        } else {
          g[base + i] = static_cast<T>(gscale * grad_out[base + i]);
        }
      }
    }
  }
  return g;
}

template <std::floating_point T>
void BatchNorm2d<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  out.push_back({join_name(prefix, "gamma"), &gamma_, &gamma_grad_});
  out.push_back({join_name(prefix, "beta"), &beta_, &beta_grad_});
  out.push_back({join_name(prefix, "running_mean"), &running_mean_, nullptr});
  out.push_back({join_name(prefix, "running_var"), &running_var_, nullptr});
}

// ------------------------------------------------------------------ concat

template <std::floating_point T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels: spatial/batch mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const std::size_t plane = a.height() * a.width();
  const std::size_t ca = a.channels(), cb = b.channels();
  BasicTensor<T> out({a.batch(), ca + cb, a.height(), a.width()});
  for (std::size_t n = 0; n < a.batch(); ++n) {
    T* dst = out.data() + n * (ca + cb) * plane;
    std::copy_n(a.data() + n * ca * plane, ca * plane, dst);
    std::copy_n(b.data() + n * cb * plane, cb * plane, dst + ca * plane);
  }
  return out;
}

template <std::floating_point T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& x, std::size_t channels_a) {
  require_rank4(x, "split_channels");
  if (channels_a > x.channels()) throw ShapeError("split_channels: split point beyond channel count");
  const std::size_t plane = x.height() * x.width();
  const std::size_t ca = channels_a, cb = x.channels() - channels_a;
  BasicTensor<T> a({x.batch(), ca, x.height(), x.width()});
  BasicTensor<T> b({x.batch(), cb, x.height(), x.width()});
  for (std::size_t n = 0; n < x.batch(); ++n) {
    const T* src = x.data() + n * (ca + cb) * plane;
    std::copy_n(src, ca * plane, a.data() + n * ca * plane);
    std::copy_n(src + ca * plane, cb * plane, b.data() + n * cb * plane);
  }
  return {std::move(a), std::move(b)};
}

#define LSEG_INSTANTIATE(T)                                                                         \
  template class ReLU<T>;                                                                           \
  template class Sigmoid<T>;                                                                        \
  template class Softmax<T>;                                                                        \
  template class MaxPool2d<T>;                                                                      \
  template class AvgPool2d<T>;                                                                      \
  template class GlobalAvgPool<T>;                                                                  \
  template class BatchNorm2d<T>;                                                                    \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                              \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                           \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                           \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                   \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>&, std::size_t);

LSEG_INSTANTIATE(float)
LSEG_INSTANTIATE(double)
#undef LSEG_INSTANTIATE

}  // namespace lseg::nn
