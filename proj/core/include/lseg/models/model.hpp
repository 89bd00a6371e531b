#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lseg/models/spec.hpp"
#include "lseg/nn/module.hpp"
#include "lseg/rng.hpp"

namespace lseg::models {

/// A built network together with the spec it was built from.
///
/// forward() is const and uses evaluation semantics (running batch-norm
/// statistics), so one model may serve concurrent requests. Training goes
/// through forward_train()/backward(), which need exclusive access.
template <std::floating_point T>
class Model {
 public:
  using TensorT = BasicTensor<T>;

  Model(ModelSpec spec, std::unique_ptr<nn::Module<T>> network);

  const ModelSpec& spec() const noexcept { return spec_; }
  nn::Module<T>& network() noexcept { return *network_; }

  /// N x in_channels x H x W -> N x 1 x H x W probabilities in (0, 1).
  TensorT forward(const TensorT& x) const;
  TensorT forward_train(const TensorT& x);
  TensorT backward(const TensorT& grad_out);

  /// Trainable tensors followed by buffers, in a fixed order.
  std::vector<nn::Parameter<T>> parameters() { return network_->parameters(); }
  /// Number of trainable scalars.
  std::size_t parameter_count() const;
  void zero_grad() { network_->zero_grad(); }
  void set_training(bool training) { network_->set_training(training); }

  /// Throws ShapeError unless x is N x in_channels x H x W with H and W
  /// positive multiples of 2^depth.
  void validate_input(const TensorT& x) const;

 private:
  ModelSpec spec_;
  std::unique_ptr<nn::Module<T>> network_;
};

/// Builds the network described by `spec`. Equal seeds give bitwise-equal
/// initial weights.
template <std::floating_point T>
Model<T> build_model(const ModelSpec& spec, Rng& rng);

/// 1 where prob >= threshold, else 0. Same shape as `probs`.
template <std::floating_point T>
BasicTensor<T> predict_mask(const BasicTensor<T>& probs, double threshold);

/// Binary mask as bytes, row-major.
template <std::floating_point T>
std::vector<std::uint8_t> predict_mask_bytes(const BasicTensor<T>& probs, double threshold);

}  // namespace lseg::models
