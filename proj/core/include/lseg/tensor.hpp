#pragma once

#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lseg {

/// Extents of a tensor, outermost first. Image data uses N x C x H x W.
using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

/// Raised when operand shapes are incompatible or an axis is out of range.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of rank 1..4.
///
/// Element (n, c, h, w) of a rank-4 tensor lives at ((n*C + c)*H + h)*W + w.
/// Operations never mutate their operands; the only mutating members are the
/// raw accessors used by kernels while building a result.
template <std::floating_point T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : BasicTensor(Shape{0}) {}
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> values);
  BasicTensor(Shape shape, std::initializer_list<T> values)
      : BasicTensor(std::move(shape), std::vector<T>(values)) {}

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor full(Shape shape, T value) { return BasicTensor(std::move(shape), value); }
  static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  // Rank-4 extent shortcuts; throw ShapeError on other ranks.
  std::size_t batch() const { return dim4(0); }
  std::size_t channels() const { return dim4(1); }
  std::size_t height() const { return dim4(2); }
  std::size_t width() const { return dim4(3); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return data_[offset(n, c, h, w)]; }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }

  /// Same values, new extents. Element count must be preserved.
  BasicTensor reshaped(Shape shape) const;

  template <std::floating_point U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const noexcept;

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t dim4(std::size_t axis) const;

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Elementwise. Binary ops require identical shapes (no broadcasting).
template <std::floating_point T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <std::floating_point T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <std::floating_point T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <std::floating_point T> BasicTensor<T> scale(const BasicTensor<T>& a, T factor);
template <std::floating_point T> BasicTensor<T> add_scalar(const BasicTensor<T>& a, T value);
template <std::floating_point T> BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi);

/// In-place a += b. Used for gradient accumulation.
template <std::floating_point T> void accumulate(BasicTensor<T>& into, const BasicTensor<T>& b);

// Reductions. The scalar forms reduce every element; the axis forms remove
// the listed axes (a full reduction yields a rank-1 tensor of extent 1).
template <std::floating_point T> T sum(const BasicTensor<T>& a);
template <std::floating_point T> T mean(const BasicTensor<T>& a);
template <std::floating_point T> T max(const BasicTensor<T>& a);
template <std::floating_point T> BasicTensor<T> sum(const BasicTensor<T>& a, std::span<const std::size_t> axes);
template <std::floating_point T> BasicTensor<T> mean(const BasicTensor<T>& a, std::span<const std::size_t> axes);
template <std::floating_point T> BasicTensor<T> max(const BasicTensor<T>& a, std::span<const std::size_t> axes);

/// Inner product of two equally shaped tensors, accumulated in double.
template <std::floating_point T> double dot(const BasicTensor<T>& a, const BasicTensor<T>& b);

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace lseg
