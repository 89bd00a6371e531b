#include "lseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lseg {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

namespace {

void check_rank(const Shape& shape) {
  if (shape.empty() || shape.size() > kMaxRank) {
    throw ShapeError("tensor rank must be between 1 and 4, got " + std::to_string(shape.size()));
  }
}

}  // namespace

template <std::floating_point T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_rank(shape_);
  data_.assign(element_count(shape_), fill);
}

template <std::floating_point T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
  check_rank(shape_);
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " needs " + std::to_string(element_count(shape_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

template <std::floating_point T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
  }
  return shape_[axis];
}

template <std::floating_point T>
std::size_t BasicTensor<T>::dim4(std::size_t axis) const {
  if (shape_.size() != 4) throw ShapeError("expected an NxCxHxW tensor, got " + to_string(shape_));
  return shape_[axis];
}

template <std::floating_point T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return BasicTensor(std::move(shape), data_);
}

template <std::floating_point T>
bool BasicTensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

namespace {

template <std::floating_point T, class Op>
BasicTensor<T> zip(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what, Op op) {
  require_same_shape(a.shape(), b.shape(), what);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

template <std::floating_point T, class Op>
BasicTensor<T> map(const BasicTensor<T>& a, Op op) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i]);
  return out;
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, "add", [](T x, T y) { return x + y; });
}
template <std::floating_point T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, "sub", [](T x, T y) { return x - y; });
}
template <std::floating_point T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, "mul", [](T x, T y) { return x * y; });
}
template <std::floating_point T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  return map(a, [factor](T x) { return x * factor; });
}
template <std::floating_point T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T value) {
  return map(a, [value](T x) { return x + value; });
}
template <std::floating_point T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lower bound exceeds upper bound");
  return map(a, [lo, hi](T x) { return std::clamp(x, lo, hi); });
}

template <std::floating_point T>
void accumulate(BasicTensor<T>& into, const BasicTensor<T>& b) {
  require_same_shape(into.shape(), b.shape(), "accumulate");
  T* dst = into.data();
  const T* src = b.data();
  for (std::size_t i = 0; i < into.size(); ++i) dst[i] += src[i];
}

template <std::floating_point T>
T sum(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (T v : a.values()) acc += v;
  return static_cast<T>(acc);
}

template <std::floating_point T>
T mean(const BasicTensor<T>& a) {
  if (a.size() == 0) throw ShapeError("mean of an empty tensor");
  double acc = 0.0;
  for (T v : a.values()) acc += v;
  return static_cast<T>(acc / static_cast<double>(a.size()));
}

template <std::floating_point T>
T max(const BasicTensor<T>& a) {
  if (a.size() == 0) throw ShapeError("max of an empty tensor");
  return *std::max_element(a.values().begin(), a.values().end());
}

namespace {

enum class Reduction { kSum, kMean, kMax };

template <std::floating_point T>
BasicTensor<T> reduce_axes(const BasicTensor<T>& a, std::span<const std::size_t> axes, Reduction kind) {
  const Shape& in = a.shape();
  std::vector<bool> reduced(in.size(), false);
  for (auto ax : axes) {
    if (ax >= in.size()) {
      throw ShapeError("reduction axis " + std::to_string(ax) + " invalid for shape " + to_string(in));
    }
    if (reduced[ax]) throw ShapeError("reduction axis " + std::to_string(ax) + " listed twice");
    reduced[ax] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!reduced[i]) out_shape.push_back(in[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  const std::size_t out_count = element_count(out_shape);
  std::vector<double> acc(out_count, kind == Reduction::kMax ? -std::numeric_limits<double>::infinity() : 0.0);
  std::size_t group = 1;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (reduced[i]) group *= in[i];
  }
  if (group == 0) throw ShapeError("reduction over an empty axis of " + to_string(in));

  // Walk the input in row-major order, tracking the output coordinate.
  std::vector<std::size_t> idx(in.size(), 0);
  for (std::size_t flat = 0; flat < a.size(); ++flat) {
    std::size_t o = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!reduced[i]) o = o * in[i] + idx[i];
    }
    const double v = a[flat];
    if (kind == Reduction::kMax) {
      acc[o] = std::max(acc[o], v);
    } else {
      acc[o] += v;
    }
    for (std::size_t i = in.size(); i-- > 0;) {
      if (++idx[i] < in[i]) break;
      idx[i] = 0;
    }
  }
  BasicTensor<T> out(out_shape);
  for (std::size_t i = 0; i < out_count; ++i) {
    out[i] = static_cast<T>(kind == Reduction::kMean ? acc[i] / static_cast<double>(group) : acc[i]);
  }
  return out;
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> sum(const BasicTensor<T>& a, std::span<const std::size_t> axes) {
  return reduce_axes(a, axes, Reduction::kSum);
}
template <std::floating_point T>
BasicTensor<T> mean(const BasicTensor<T>& a, std::span<const std::size_t> axes) {
  return reduce_axes(a, axes, Reduction::kMean);
}
template <std::floating_point T>
BasicTensor<T> max(const BasicTensor<T>& a, std::span<const std::size_t> axes) {
  return reduce_axes(a, axes, Reduction::kMax);
}

template <std::floating_point T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

#define LSEG_INSTANTIATE(T)                                                                    \
  template class BasicTensor<T>;                                                               \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                     \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                \
  template BasicTensor<T> clamp(const BasicTensor<T>&, T, T);                                  \
  template void accumulate(BasicTensor<T>&, const BasicTensor<T>&);                            \
  template T sum(const BasicTensor<T>&);                                                       \
  template T mean(const BasicTensor<T>&);                                                      \
  template T max(const BasicTensor<T>&);                                                       \
  template BasicTensor<T> sum(const BasicTensor<T>&, std::span<const std::size_t>);            \
  template BasicTensor<T> mean(const BasicTensor<T>&, std::span<const std::size_t>);           \
  template BasicTensor<T> max(const BasicTensor<T>&, std::span<const std::size_t>);            \
  template double dot(const BasicTensor<T>&, const BasicTensor<T>&);

LSEG_INSTANTIATE(float)
LSEG_INSTANTIATE(double)
#undef LSEG_INSTANTIATE

}  // namespace lseg
