#pragma once

#include <memory>
#include <vector>

#include "lseg/models/spec.hpp"
#include "lseg/nn/blocks.hpp"

namespace lseg::models {

/// U-Net encoder-decoder with skip connections.
///
/// Encoder stage i produces base_width * 2^i channels (two 3x3 conv + ReLU,
/// or a dense block followed by a transition for unet-dense), optionally
/// gated by an SE block, and is then halved spatially. Decoder stage i
/// upsamples with a stride-2 transposed convolution, concatenates the
/// upsampled map (first) with the matching encoder output, and applies two
/// 3x3 conv + ReLU. A 1x1 convolution and a sigmoid give one probability
/// channel.
template <std::floating_point T>
class UNet final : public nn::Module<T> {
 public:
  using typename nn::Module<T>::TensorT;

  UNet(const ModelSpec& spec, Rng& rng);

  TensorT forward(const TensorT& x) override;
  TensorT infer(const TensorT& x) const override;
  TensorT backward(const TensorT& grad_out) override;
  void collect(const std::string& prefix, std::vector<nn::Parameter<T>>& out) override;
  void set_training(bool training) override;

  /// Channels entering decoder stage i: upsampled plus skip.
  std::size_t decoder_concat_channels(std::size_t stage) const { return stages_.at(stage).concat_channels; }
  std::size_t skip_channels(std::size_t stage) const { return stages_.at(stage).skip_channels; }

 private:
  struct Stage {
    nn::ModulePtr<T> encoder;
    std::unique_ptr<nn::SEBlock<T>> se;
    nn::ModulePtr<T> down;
    std::unique_ptr<nn::ConvTranspose2d<T>> up;
    nn::ModulePtr<T> decoder;
    std::size_t skip_channels = 0;
    std::size_t up_channels = 0;
    std::size_t concat_channels = 0;
  };

  std::vector<Stage> stages_;
  nn::ModulePtr<T> bottleneck_;
  nn::Sequential<T> head_;
};

/// Strided-conv encoder, ASPP context module, transposed-conv decoder.
///
/// Layout: stem conv3x3 -> depth x (conv3x3 stride 2 -> ReLU -> conv3x3 ->
/// ReLU) -> ASPP -> depth x (transposed conv stride 2 -> ReLU) -> conv1x1 ->
/// sigmoid.
template <std::floating_point T>
std::unique_ptr<nn::Sequential<T>> build_deeplab_lite(const ModelSpec& spec, Rng& rng);

}  // namespace lseg::models
