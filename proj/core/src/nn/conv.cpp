#include "lseg/nn/conv.hpp"

#include <cmath>
#include <vector>

namespace lseg::nn {

using kernels::WindowGeometry;

template <std::floating_point T>
void he_uniform(BasicTensor<T>& weight, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : weight.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

namespace {

void validate_options(const ConvOptions& o, const char* who) {
  if (o.in_channels == 0 || o.out_channels == 0 || o.kernel == 0 || o.stride == 0 || o.dilation == 0) {
    throw std::invalid_argument(std::string(who) + ": channels, kernel, stride and dilation must be positive");
  }
}

template <std::floating_point T>
void require_input(const BasicTensor<T>& x, std::size_t channels, const char* who) {
  if (x.rank() != 4) throw ShapeError(std::string(who) + ": expected NxCxHxW input, got " + to_string(x.shape()));
  if (x.channels() != channels) {
    throw ShapeError(std::string(who) + ": expected " + std::to_string(channels) + " input channels, got " +
                     std::to_string(x.channels()) + " (input shape " + to_string(x.shape()) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <std::floating_point T>
Conv2d<T>::Conv2d(const ConvOptions& options, Rng& rng)
    : options_(options),
      weight_({options.out_channels, options.in_channels, options.kernel, options.kernel}),
      bias_({options.out_channels}),
      weight_grad_(weight_.shape()),
      bias_grad_(bias_.shape()) {
  validate_options(options, "conv2d");
  he_uniform(weight_, options.in_channels * options.kernel * options.kernel, rng);
}

template <std::floating_point T>
WindowGeometry Conv2d<T>::geometry(const TensorT& x) const {
  require_input(x, options_.in_channels, "conv2d");
  WindowGeometry g{options_.in_channels, x.height(), x.width(), options_.kernel,
                   options_.stride, options_.padding, options_.dilation};
  if (g.out_h() <= 0 || g.out_w() <= 0) {
    throw ShapeError("conv2d: degenerate output extent for input " + to_string(x.shape()) + " with kernel " +
                     std::to_string(options_.kernel) + ", dilation " + std::to_string(options_.dilation) +
                     ", padding " + std::to_string(options_.padding));
  }
  return g;
}

template <std::floating_point T>
std::pair<std::size_t, std::size_t> Conv2d<T>::output_extent(std::size_t h, std::size_t w) const {
  const auto g = geometry(TensorT({1, options_.in_channels, h, w}));
  return {static_cast<std::size_t>(g.out_h()), static_cast<std::size_t>(g.out_w())};
}

template <std::floating_point T>
typename Conv2d<T>::TensorT Conv2d<T>::infer(const TensorT& x) const {
  const auto g = geometry(x);
  const std::size_t n = x.batch();
  const std::size_t cout = options_.out_channels;
  const std::size_t oh = static_cast<std::size_t>(g.out_h());
  const std::size_t ow = static_cast<std::size_t>(g.out_w());
  const std::size_t cols = oh * ow;
  const std::size_t rows = g.rows();
  const std::size_t in_plane = options_.in_channels * x.height() * x.width();

  TensorT out({n, cout, oh, ow});
  std::vector<T> col(g.is_pointwise() ? 0 : rows * cols);
  for (std::size_t b = 0; b < n; ++b) {
    const T* src = x.data() + b * in_plane;
    T* dst = out.data() + b * cout * cols;
    for (std::size_t co = 0; co < cout; ++co) std::fill(dst + co * cols, dst + (co + 1) * cols, bias_[co]);
    if (!g.is_pointwise()) {
      kernels::im2col(src, g, col.data());
      src = col.data();
    }
    kernels::gemm_nn(cout, cols, rows, weight_.data(), src, dst);
  }
  return out;
}

template <std::floating_point T>
typename Conv2d<T>::TensorT Conv2d<T>::forward(const TensorT& x) {
  TensorT out = infer(x);
  input_ = x;
  return out;
}

template <std::floating_point T>
typename Conv2d<T>::TensorT Conv2d<T>::backward(const TensorT& grad_out) {
  const auto g = geometry(input_);
  const std::size_t n = input_.batch();
  const std::size_t cout = options_.out_channels;
  const std::size_t cols = g.cols();
  const std::size_t rows = g.rows();
  const std::size_t in_plane = options_.in_channels * input_.height() * input_.width();
  require_same_shape(grad_out.shape(),
                     Shape{n, cout, static_cast<std::size_t>(g.out_h()), static_cast<std::size_t>(g.out_w())},
                     "conv2d backward");

  TensorT grad_in(input_.shape());
  std::vector<T> col(g.is_pointwise() ? 0 : rows * cols);
  std::vector<T> grad_col(g.is_pointwise() ? 0 : rows * cols);
  for (std::size_t b = 0; b < n; ++b) {
    const T* go = grad_out.data() + b * cout * cols;
    const T* src = input_.data() + b * in_plane;
    if (!g.is_pointwise()) {
      kernels::im2col(src, g, col.data());
      src = col.data();
    }
    kernels::gemm_nt(cout, rows, cols, go, src, weight_grad_.data());
    for (std::size_t co = 0; co < cout; ++co) {
      T acc = T(0);
      for (std::size_t j = 0; j < cols; ++j) acc += go[co * cols + j];
      bias_grad_[co] += acc;
    }
    T* gi = grad_in.data() + b * in_plane;
    if (g.is_pointwise()) {
      kernels::gemm_tn(rows, cols, cout, weight_.data(), go, gi);
    } else {
      std::fill(grad_col.begin(), grad_col.end(), T(0));
      kernels::gemm_tn(rows, cols, cout, weight_.data(), go, grad_col.data());
      kernels::col2im(grad_col.data(), g, gi);
    }
  }
  return grad_in;
}

template <std::floating_point T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  out.push_back({join_name(prefix, "weight"), &weight_, &weight_grad_});
  if (options_.bias) out.push_back({join_name(prefix, "bias"), &bias_, &bias_grad_});
}

// ------------------------------------------------------- ConvTranspose2d

template <std::floating_point T>
ConvTranspose2d<T>::ConvTranspose2d(const ConvOptions& options, Rng& rng)
    : options_(options),
      weight_({options.in_channels, options.out_channels, options.kernel, options.kernel}),
      bias_({options.out_channels}),
      weight_grad_(weight_.shape()),
      bias_grad_(bias_.shape()) {
  validate_options(options, "transposed_conv2d");
  he_uniform(weight_, options.in_channels * options.kernel * options.kernel, rng);
}

template <std::floating_point T>
std::pair<std::size_t, std::size_t> ConvTranspose2d<T>::output_extent(std::size_t h, std::size_t w) const {
  const auto& o = options_;
  const long span = static_cast<long>(o.dilation * (o.kernel - 1) + 1);
  const long oh = (static_cast<long>(h) - 1) * static_cast<long>(o.stride) - 2 * static_cast<long>(o.padding) + span;
  const long ow = (static_cast<long>(w) - 1) * static_cast<long>(o.stride) - 2 * static_cast<long>(o.padding) + span;
  if (h == 0 || w == 0 || oh <= 0 || ow <= 0) {
    throw ShapeError("transposed_conv2d: degenerate output extent for input " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  return {static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
}

template <std::floating_point T>
WindowGeometry ConvTranspose2d<T>::geometry(std::size_t out_h, std::size_t out_w) const {
  return WindowGeometry{options_.out_channels, out_h, out_w, options_.kernel,
                        options_.stride, options_.padding, options_.dilation};
}

template <std::floating_point T>
typename ConvTranspose2d<T>::TensorT ConvTranspose2d<T>::infer(const TensorT& x) const {
  require_input(x, options_.in_channels, "transposed_conv2d");
  const auto [oh, ow] = output_extent(x.height(), x.width());
  const auto g = geometry(oh, ow);
  const std::size_t n = x.batch();
  const std::size_t cin = options_.in_channels;
  const std::size_t cout = options_.out_channels;
  const std::size_t in_cols = x.height() * x.width();
  const std::size_t rows = g.rows();
  const std::size_t out_plane = oh * ow;

  TensorT out({n, cout, oh, ow});
  std::vector<T> col(rows * in_cols);
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(col.begin(), col.end(), T(0));
    kernels::gemm_tn(rows, in_cols, cin, weight_.data(), x.data() + b * cin * in_cols, col.data());
    T* dst = out.data() + b * cout * out_plane;
    kernels::col2im(col.data(), g, dst);
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t j = 0; j < out_plane; ++j) dst[co * out_plane + j] += bias_[co];
    }
  }
  return out;
}

template <std::floating_point T>
typename ConvTranspose2d<T>::TensorT ConvTranspose2d<T>::forward(const TensorT& x) {
  TensorT out = infer(x);
  input_ = x;
  return out;
}

template <std::floating_point T>
typename ConvTranspose2d<T>::TensorT ConvTranspose2d<T>::backward(const TensorT& grad_out) {
  const auto [oh, ow] = output_extent(input_.height(), input_.width());
  const std::size_t n = input_.batch();
  const std::size_t cin = options_.in_channels;
  const std::size_t cout = options_.out_channels;
  require_same_shape(grad_out.shape(), Shape{n, cout, oh, ow}, "transposed_conv2d backward");
  const auto g = geometry(oh, ow);
  const std::size_t in_cols = input_.height() * input_.width();
  const std::size_t rows = g.rows();
  const std::size_t out_plane = oh * ow;

  TensorT grad_in(input_.shape());
  std::vector<T> col(rows * in_cols);
  for (std::size_t b = 0; b < n; ++b) {
    const T* go = grad_out.data() + b * cout * out_plane;
    kernels::im2col(go, g, col.data());
    kernels::gemm_nn(cin, in_cols, rows, weight_.data(), col.data(), grad_in.data() + b * cin * in_cols);
    kernels::gemm_nt(cin, rows, in_cols, input_.data() + b * cin * in_cols, col.data(), weight_grad_.data());
    for (std::size_t co = 0; co < cout; ++co) {
      T acc = T(0);
      for (std::size_t j = 0; j < out_plane; ++j) acc += go[co * out_plane + j];
      bias_grad_[co] += acc;
    }
  }
  return grad_in;
}

template <std::floating_point T>
void ConvTranspose2d<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  out.push_back({join_name(prefix, "weight"), &weight_, &weight_grad_});
  if (options_.bias) out.push_back({join_name(prefix, "bias"), &bias_, &bias_grad_});
}

template void he_uniform<float>(BasicTensor<float>&, std::size_t, Rng&);
template void he_uniform<double>(BasicTensor<double>&, std::size_t, Rng&);
template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;

}  // namespace lseg::nn
