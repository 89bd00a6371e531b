#pragma once

#include <utility>

#include "lseg/nn/module.hpp"

namespace lseg::nn {

template <std::floating_point T>
class ReLU final : public Module<T> {
 public:
  using typename Module<T>::TensorT;
  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;

 private:
  TensorT input_;
};

/// Logistic sigmoid. Outputs are kept inside the open interval (0, 1) even
/// where the exact value rounds to 0 or 1 in T.
template <std::floating_point T>
class Sigmoid final : public Module<T> {
 public:
  using typename Module<T>::TensorT;
  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;

 private:
  TensorT output_;
};

/// Softmax across axis 1 (classes) of an NxC or NxCxHxW tensor.
template <std::floating_point T>
class Softmax final : public Module<T> {
 public:
  using typename Module<T>::TensorT;
  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;

 private:
  TensorT output_;
};

/// 2x2 max pooling with stride 2. Odd extents are rejected. Backward routes
/// the gradient to the first maximum in row-major window order.
template <std::floating_point T>
class MaxPool2d final : public Module<T> {
 public:
  using typename Module<T>::TensorT;
  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;

 private:
  TensorT pool(const TensorT& x, std::vector<std::size_t>* argmax) const;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// 2x2 mean pooling with stride 2.
template <std::floating_point T>
class AvgPool2d final : public Module<T> {
 public:
  using typename Module<T>::TensorT;
  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;

 private:
  Shape input_shape_;
};

/// NxCxHxW -> NxC spatial mean.
template <std::floating_point T>
class GlobalAvgPool final : public Module<T> {
 public:
  using typename Module<T>::TensorT;
  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;

 private:
  Shape input_shape_;
};

/// Per-channel batch normalisation for NxCxHxW input.
///
/// Training mode normalises with the batch mean and population variance and
/// updates the running statistics with the given momentum; evaluation mode
/// applies the running statistics as a fixed affine map.
template <std::floating_point T>
class BatchNorm2d final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  explicit BatchNorm2d(std::size_t channels, double eps = 1e-5, double momentum = 0.1);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;

  TensorT& gamma() noexcept { return gamma_; }
  TensorT& beta() noexcept { return beta_; }
  TensorT& running_mean() noexcept { return running_mean_; }
  TensorT& running_var() noexcept { return running_var_; }
  double eps() const noexcept { return eps_; }

 private:
  std::size_t channels_;
  double eps_;
  double momentum_;
  TensorT gamma_, beta_, running_mean_, running_var_;
  TensorT gamma_grad_, beta_grad_;
  // Cached for backward.
  TensorT normalized_;
  std::vector<double> inv_std_;
  bool used_batch_stats_ = false;
};

// Channel concatenation along axis 1; a's channels come first.
template <std::floating_point T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Inverse of concat_channels: the first `channels_a` channels and the rest.
template <std::floating_point T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& x, std::size_t channels_a);

// Stateless helpers used by the modules above and by callers that only need
// the forward map.
template <std::floating_point T> BasicTensor<T> relu(const BasicTensor<T>& x);
template <std::floating_point T> BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <std::floating_point T> BasicTensor<T> softmax(const BasicTensor<T>& x);
template <std::floating_point T> BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

}  // namespace lseg::nn
