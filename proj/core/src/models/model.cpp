#include "lseg/models/model.hpp"

#include "lseg/models/networks.hpp"

namespace lseg::models {

template <std::floating_point T>
Model<T>::Model(ModelSpec spec, std::unique_ptr<nn::Module<T>> network)
    : spec_(std::move(spec)), network_(std::move(network)) {
  spec_.validate();
  if (!network_) throw SpecError("model needs a network");
}

template <std::floating_point T>
void Model<T>::validate_input(const TensorT& x) const {
  if (x.rank() != 4) throw ShapeError("model input must be N x C x H x W, got " + lseg::to_string(x.shape()));
  if (x.channels() != spec_.in_channels) {
    throw ShapeError("model expects " + std::to_string(spec_.in_channels) + " input channels, got " +
                     std::to_string(x.channels()));
  }
  const std::size_t m = spec_.spatial_multiple();
  if (x.batch() == 0 || x.height() == 0 || x.width() == 0 || x.height() % m != 0 || x.width() % m != 0) {
    throw ShapeError("input extent " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                     " must be a positive multiple of " + std::to_string(m));
  }
}

template <std::floating_point T>
typename Model<T>::TensorT Model<T>::forward(const TensorT& x) const {
  validate_input(x);
  return network_->infer(x);
}

template <std::floating_point T>
typename Model<T>::TensorT Model<T>::forward_train(const TensorT& x) {
  validate_input(x);
  return network_->forward(x);
}

template <std::floating_point T>
typename Model<T>::TensorT Model<T>::backward(const TensorT& grad_out) {
  return network_->backward(grad_out);
}

template <std::floating_point T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : network_->parameters()) {
    if (p.grad) n += p.value->size();
  }
  return n;
}

template <std::floating_point T>
Model<T> build_model(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  std::unique_ptr<nn::Module<T>> net;
  if (spec.architecture == Architecture::kDeepLabLite) {
    net = build_deeplab_lite<T>(spec, rng);
  } else {
    net = std::make_unique<UNet<T>>(spec, rng);
  }
  net->set_training(false);
  return Model<T>(spec, std::move(net));
}

template <std::floating_point T>
BasicTensor<T> predict_mask(const BasicTensor<T>& probs, double threshold) {
  BasicTensor<T> out(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = static_cast<double>(probs[i]) >= threshold ? T(1) : T(0);
  return out;
}

template <std::floating_point T>
std::vector<std::uint8_t> predict_mask_bytes(const BasicTensor<T>& probs, double threshold) {
  std::vector<std::uint8_t> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = static_cast<double>(probs[i]) >= threshold ? 1 : 0;
  return out;
}

#define LSEG_INSTANTIATE(T)                                                          \
  template class Model<T>;                                                           \
  template Model<T> build_model<T>(const ModelSpec&, Rng&);                          \
  template BasicTensor<T> predict_mask<T>(const BasicTensor<T>&, double);            \
  template std::vector<std::uint8_t> predict_mask_bytes<T>(const BasicTensor<T>&, double);

LSEG_INSTANTIATE(float)
LSEG_INSTANTIATE(double)
#undef LSEG_INSTANTIATE

}  // namespace lseg::models
