#pragma once

#include "lseg/nn/kernels.hpp"
#include "lseg/nn/module.hpp"
#include "lseg/rng.hpp"

namespace lseg::nn {

struct ConvOptions {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  bool bias = true;
};

/// He-uniform initialisation: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <std::floating_point T>
void he_uniform(BasicTensor<T>& weight, std::size_t fan_in, Rng& rng);

/// 2-D cross-correlation (no kernel flip). Weight layout Cout x Cin x k x k.
template <std::floating_point T>
class Conv2d final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  Conv2d(const ConvOptions& options, Rng& rng);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;

  /// Output extents for an input of the given height/width. Throws ShapeError
  /// when the window does not fit.
  std::pair<std::size_t, std::size_t> output_extent(std::size_t h, std::size_t w) const;

  const ConvOptions& options() const noexcept { return options_; }
  TensorT& weight() noexcept { return weight_; }
  TensorT& bias() noexcept { return bias_; }
  const TensorT& weight() const noexcept { return weight_; }
  const TensorT& bias() const noexcept { return bias_; }
  const TensorT& weight_grad() const noexcept { return weight_grad_; }
  const TensorT& bias_grad() const noexcept { return bias_grad_; }

 private:
  kernels::WindowGeometry geometry(const TensorT& x) const;

  ConvOptions options_;
  TensorT weight_, bias_;
  TensorT weight_grad_, bias_grad_;
  TensorT input_;
};

/// Transposed convolution, the adjoint of Conv2d's input map with the same
/// geometry. Weight layout Cin x Cout x k x k, so a Conv2d weight tensor
/// used here gives exactly the adjoint operator.
/// H_out = (H - 1)s - 2p + d(k - 1) + 1.
template <std::floating_point T>
class ConvTranspose2d final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  ConvTranspose2d(const ConvOptions& options, Rng& rng);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;

  std::pair<std::size_t, std::size_t> output_extent(std::size_t h, std::size_t w) const;

  const ConvOptions& options() const noexcept { return options_; }
  TensorT& weight() noexcept { return weight_; }
  TensorT& bias() noexcept { return bias_; }

 private:
  kernels::WindowGeometry geometry(std::size_t out_h, std::size_t out_w) const;

  ConvOptions options_;
  TensorT weight_, bias_;
  TensorT weight_grad_, bias_grad_;
  TensorT input_;
};

}  // namespace lseg::nn
