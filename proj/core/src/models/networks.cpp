#include "lseg/models/networks.hpp"

#include <cassert>

namespace lseg::models {

using nn::ConvOptions;

template <std::floating_point T>
UNet<T>::UNet(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.architecture == Architecture::kDeepLabLite) throw SpecError("UNet cannot build a deeplab-lite spec");
  const bool dense = spec.architecture == Architecture::kUNetDense;

  std::size_t channels = spec.in_channels;
  stages_.resize(spec.depth);
  for (std::size_t i = 0; i < spec.depth; ++i) {
    auto& s = stages_[i];
    const std::size_t width = spec.width_at(i);
    if (dense) {
      const nn::DenseBlockConfig cfg{channels, spec.dense_layers, spec.growth};
      s.encoder = std::make_unique<nn::DenseBlock<T>>(cfg, rng);
      s.skip_channels = cfg.out_channels();
      s.down = std::make_unique<nn::Transition<T>>(s.skip_channels, width, rng);
      channels = width;
    } else {
      s.encoder = nn::make_double_conv<T>(channels, width, rng);
      s.skip_channels = width;
      s.down = std::make_unique<nn::MaxPool2d<T>>();
      channels = width;
    }
    if (spec.se) s.se = std::make_unique<nn::SEBlock<T>>(nn::SEBlockConfig{s.skip_channels, spec.se_reduction}, rng);
  }

  const std::size_t bottom = spec.width_at(spec.depth);
  bottleneck_ = nn::make_double_conv<T>(channels, bottom, rng);
  channels = bottom;

  for (std::size_t k = spec.depth; k-- > 0;) {
    auto& s = stages_[k];
    const std::size_t width = spec.width_at(k);
    s.up = std::make_unique<nn::ConvTranspose2d<T>>(ConvOptions{channels, width, 2, 2, 0, 1, true}, rng);
    s.up_channels = width;
    s.concat_channels = s.up_channels + s.skip_channels;
    s.decoder = nn::make_double_conv<T>(s.concat_channels, width, rng);
    channels = width;
  }
  assert(channels == spec.base_width);

  head_.template emplace<nn::Conv2d<T>>("conv", ConvOptions{channels, 1, 1, 1, 0, 1, true}, rng);
  head_.template emplace<nn::Sigmoid<T>>("sigmoid");
}

template <std::floating_point T>
typename UNet<T>::TensorT UNet<T>::forward(const TensorT& x) {
  std::vector<TensorT> skips;
  skips.reserve(stages_.size());
  TensorT h = x;
  for (auto& s : stages_) {
    h = s.encoder->forward(h);
    if (s.se) h = s.se->forward(h);
    skips.push_back(h);
    h = s.down->forward(h);
  }
  h = bottleneck_->forward(h);
  for (std::size_t k = stages_.size(); k-- > 0;) {
    auto& s = stages_[k];
    const TensorT up = s.up->forward(h);
    const TensorT joined = nn::concat_channels(up, skips[k]);
    if (joined.channels() != s.concat_channels) {
      throw ShapeError("decoder stage " + std::to_string(k) + " expected " + std::to_string(s.concat_channels) +
                       " channels after concatenation, got " + std::to_string(joined.channels()));
    }
    h = s.decoder->forward(joined);
  }
  return head_.forward(h);
}

template <std::floating_point T>
typename UNet<T>::TensorT UNet<T>::infer(const TensorT& x) const {
  std::vector<TensorT> skips;
  skips.reserve(stages_.size());
  TensorT h = x;
  for (const auto& s : stages_) {
    h = s.encoder->infer(h);
    if (s.se) h = s.se->infer(h);
    skips.push_back(h);
    h = s.down->infer(h);
  }
  h = bottleneck_->infer(h);
  for (std::size_t k = stages_.size(); k-- > 0;) {
    const auto& s = stages_[k];
    h = s.decoder->infer(nn::concat_channels(s.up->infer(h), skips[k]));
  }
  return head_.infer(h);
}

template <std::floating_point T>
typename UNet<T>::TensorT UNet<T>::backward(const TensorT& grad_out) {
  std::vector<TensorT> skip_grads(stages_.size());
  TensorT g = head_.backward(grad_out);
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    auto& s = stages_[k];
    auto [g_up, g_skip] = nn::split_channels(s.decoder->backward(g), s.up_channels);
    skip_grads[k] = std::move(g_skip);
    g = s.up->backward(g_up);
  }
  g = bottleneck_->backward(g);
  for (std::size_t k = stages_.size(); k-- > 0;) {
    auto& s = stages_[k];
    g = s.down->backward(g);
    accumulate(g, skip_grads[k]);
    if (s.se) g = s.se->backward(g);
    g = s.encoder->backward(g);
  }
  return g;
}

template <std::floating_point T>
void UNet<T>::collect(const std::string& prefix, std::vector<nn::Parameter<T>>& out) {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const std::string p = nn::join_name(prefix, "enc" + std::to_string(i));
    stages_[i].encoder->collect(p, out);
    if (stages_[i].se) stages_[i].se->collect(nn::join_name(p, "se"), out);
    stages_[i].down->collect(nn::join_name(p, "down"), out);
  }
  bottleneck_->collect(nn::join_name(prefix, "bottleneck"), out);
  for (std::size_t k = stages_.size(); k-- > 0;) {
    const std::string p = nn::join_name(prefix, "dec" + std::to_string(k));
    stages_[k].up->collect(nn::join_name(p, "up"), out);
    stages_[k].decoder->collect(p, out);
  }
  head_.collect(nn::join_name(prefix, "head"), out);
}

template <std::floating_point T>
void UNet<T>::set_training(bool training) {
  nn::Module<T>::set_training(training);
  for (auto& s : stages_) {
    s.encoder->set_training(training);
    if (s.se) s.se->set_training(training);
    s.down->set_training(training);
    s.up->set_training(training);
    s.decoder->set_training(training);
  }
  bottleneck_->set_training(training);
  head_.set_training(training);
}

template <std::floating_point T>
std::unique_ptr<nn::Sequential<T>> build_deeplab_lite(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.architecture != Architecture::kDeepLabLite) throw SpecError("build_deeplab_lite needs a deeplab-lite spec");
  auto net = std::make_unique<nn::Sequential<T>>();
  std::size_t channels = spec.base_width;
  net->template emplace<nn::Conv2d<T>>("stem", ConvOptions{spec.in_channels, channels, 3, 1, 1, 1, true}, rng);
  net->template emplace<nn::ReLU<T>>("stem_relu");
  for (std::size_t i = 0; i < spec.depth; ++i) {
    const std::size_t width = spec.width_at(i + 1);
    const std::string p = "down" + std::to_string(i);
    net->template emplace<nn::Conv2d<T>>(p + ".reduce", ConvOptions{channels, width, 3, 2, 1, 1, true}, rng);
    net->template emplace<nn::ReLU<T>>(p + ".relu1");
    net->template emplace<nn::Conv2d<T>>(p + ".conv", ConvOptions{width, width, 3, 1, 1, 1, true}, rng);
    net->template emplace<nn::ReLU<T>>(p + ".relu2");
    channels = width;
  }
  nn::ASPPConfig aspp;
  aspp.in_channels = channels;
  aspp.rates = spec.aspp_rates;
  aspp.branch_channels = channels;
  aspp.out_channels = channels;
  aspp.image_pooling = spec.aspp_pooling;
  net->template emplace<nn::ASPP<T>>("aspp", aspp, rng);
  for (std::size_t i = spec.depth; i-- > 0;) {
    const std::size_t width = spec.width_at(i);
    const std::string p = "up" + std::to_string(i);
    net->template emplace<nn::ConvTranspose2d<T>>(p, ConvOptions{channels, width, 2, 2, 0, 1, true}, rng);
    net->template emplace<nn::ReLU<T>>(p + ".relu");
    channels = width;
  }
  net->template emplace<nn::Conv2d<T>>("head.conv", ConvOptions{channels, 1, 1, 1, 0, 1, true}, rng);
  net->template emplace<nn::Sigmoid<T>>("head.sigmoid");
  return net;
}

template class UNet<float>;
template class UNet<double>;
template std::unique_ptr<nn::Sequential<float>> build_deeplab_lite<float>(const ModelSpec&, Rng&);
template std::unique_ptr<nn::Sequential<double>> build_deeplab_lite<double>(const ModelSpec&, Rng&);

}  // namespace lseg::models
