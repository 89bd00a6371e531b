#pragma once

#include <vector>

#include "lseg/nn/conv.hpp"
#include "lseg/nn/layers.hpp"

namespace lseg::nn {

/// Ordered chain of named modules.
template <std::floating_point T>
class Sequential final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  Sequential& add(std::string name, ModulePtr<T> module);
  template <class M, class... Args>
  M& emplace(std::string name, Args&&... args) {
    auto owned = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *owned;
    add(std::move(name), std::move(owned));
    return ref;
  }

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;
  void set_training(bool training) override;

  std::size_t size() const noexcept { return modules_.size(); }
  Module<T>& at(std::size_t i) { return *modules_.at(i).second; }

 private:
  std::vector<std::pair<std::string, ModulePtr<T>>> modules_;
};

/// conv3x3(pad 1) -> ReLU, twice. The U-Net stage unit.
template <std::floating_point T>
std::unique_ptr<Sequential<T>> make_double_conv(std::size_t in_channels, std::size_t out_channels, Rng& rng);

struct DenseBlockConfig {
  std::size_t in_channels = 1;  // F0
  std::size_t layers = 0;       // L
  std::size_t growth = 1;       // k

  std::size_t out_channels() const noexcept { return in_channels + layers * growth; }
};

/// Each internal layer applies conv3x3(relu(batchnorm(.))) to the
/// concatenation of the block input and every earlier layer output and adds
/// `growth` channels. Output channels: F0 + L*k, with channels [0, F0) equal
/// to the input.
template <std::floating_point T>
class DenseBlock final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  DenseBlock(const DenseBlockConfig& config, Rng& rng);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;
  void set_training(bool training) override;

  const DenseBlockConfig& config() const noexcept { return config_; }
  std::size_t layer_count() const noexcept { return units_.size(); }
  BatchNorm2d<T>& norm(std::size_t i) { return units_.at(i).norm; }
  Conv2d<T>& conv(std::size_t i) { return units_.at(i).conv; }

 private:
  struct Unit {
    BatchNorm2d<T> norm;
    ReLU<T> act;
    Conv2d<T> conv;
  };
  DenseBlockConfig config_;
  std::vector<Unit> units_;
};

/// 1x1 convolution to `out_channels` followed by 2x2 mean pooling.
template <std::floating_point T>
class Transition final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  Transition(std::size_t in_channels, std::size_t out_channels, Rng& rng);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;

  Conv2d<T>& conv() noexcept { return conv_; }

 private:
  Conv2d<T> conv_;
  AvgPool2d<T> pool_;
};

struct SEBlockConfig {
  std::size_t channels = 1;
  std::size_t reduction = 16;  // r >= 1

  std::size_t bottleneck() const noexcept { return std::max<std::size_t>(1, channels / reduction); }
};

/// Squeeze-and-excitation channel gate:
///   s = GAP(x), g = sigmoid(W2 relu(W1 s)), y[n,c] = x[n,c] * g[n,c].
/// W1 is B x C and W2 is C x B with B = max(1, C / r); no biases.
template <std::floating_point T>
class SEBlock final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  SEBlock(const SEBlockConfig& config, Rng& rng);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;

  /// Gate values (N x C) for an input, computed without recording.
  TensorT gate(const TensorT& x) const;

  TensorT& squeeze_weight() noexcept { return w1_; }
  TensorT& excite_weight() noexcept { return w2_; }

 private:
  struct Trace {
    TensorT pooled, hidden_pre, gate;
  };
  Trace run(const TensorT& x) const;

  SEBlockConfig config_;
  TensorT w1_, w2_, w1_grad_, w2_grad_;
  TensorT input_;
  Trace trace_;
};

struct ASPPConfig {
  std::size_t in_channels = 1;
  std::vector<std::size_t> rates{1, 2, 4};
  std::size_t branch_channels = 8;
  std::size_t out_channels = 8;
  bool image_pooling = true;

  std::size_t branch_count() const noexcept { return rates.size() + (image_pooling ? 1 : 0); }
  std::size_t concat_channels() const noexcept { return branch_count() * branch_channels; }
};

/// Atrous spatial pyramid pooling.
///
/// One 3x3 convolution per dilation rate (padding = rate, so spatial extent is
/// preserved) followed by ReLU, plus an optional image-pooling branch
/// (GAP -> 1x1 conv -> ReLU -> nearest-neighbour broadcast). Branch outputs are
/// concatenated in rate order with the pooling branch last, then fused by a
/// 1x1 convolution and ReLU.
template <std::floating_point T>
class ASPP final : public Module<T> {
 public:
  using typename Module<T>::TensorT;

  ASPP(const ASPPConfig& config, Rng& rng);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out) override;

  /// Concatenated branch outputs before fusion.
  TensorT branches(const TensorT& x) const;

  const ASPPConfig& config() const noexcept { return config_; }
  Conv2d<T>& branch_conv(std::size_t i) { return branch_convs_.at(i); }
  Conv2d<T>& pool_conv() { return pool_conv_.at(0); }
  Conv2d<T>& fuse_conv() { return fuse_conv_.at(0); }

 private:
  ASPPConfig config_;
  std::vector<Conv2d<T>> branch_convs_;
  std::vector<ReLU<T>> branch_acts_;
  // Held in vectors so the pooling branch can be absent.
  std::vector<Conv2d<T>> pool_conv_;
  std::vector<ReLU<T>> pool_act_;
  GlobalAvgPool<T> gap_;
  std::vector<Conv2d<T>> fuse_conv_;
  ReLU<T> fuse_act_;
  Shape input_shape_;
};

/// Nearest-neighbour broadcast of an NxCx1x1 tensor to NxCxHxW.
template <std::floating_point T>
BasicTensor<T> broadcast_spatial(const BasicTensor<T>& x, std::size_t h, std::size_t w);

}  // namespace lseg::nn
