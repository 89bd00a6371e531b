#include "lseg/nn/blocks.hpp"

#include <cmath>

namespace lseg::nn {

// ------------------------------------------------------------- Sequential

template <std::floating_point T>
Sequential<T>& Sequential<T>::add(std::string name, ModulePtr<T> module) {
  module->set_training(this->training());
  modules_.emplace_back(std::move(name), std::move(module));
  return *this;
}

template <std::floating_point T>
typename Sequential<T>::TensorT Sequential<T>::forward(const TensorT& x) {
  TensorT h = x;
  for (auto& [_, m] : modules_) h = m->forward(h);
  return h;
}

template <std::floating_point T>
typename Sequential<T>::TensorT Sequential<T>::infer(const TensorT& x) const {
  TensorT h = x;
  for (const auto& [_, m] : modules_) h = m->infer(h);
  return h;
}

template <std::floating_point T>
typename Sequential<T>::TensorT Sequential<T>::backward(const TensorT& grad_out) {
  TensorT g = grad_out;
  for (auto it = modules_.rbegin(); it != modules_.rend(); ++it) g = it->second->backward(g);
  return g;
}

template <std::floating_point T>
void Sequential<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  for (auto& [name, m] : modules_) m->collect(join_name(prefix, name), out);
}

template <std::floating_point T>
void Sequential<T>::set_training(bool training) {
  Module<T>::set_training(training);
  for (auto& [_, m] : modules_) m->set_training(training);
}

template <std::floating_point T>
std::unique_ptr<Sequential<T>> make_double_conv(std::size_t in_channels, std::size_t out_channels, Rng& rng) {
  auto seq = std::make_unique<Sequential<T>>();
  seq->template emplace<Conv2d<T>>("conv1", ConvOptions{in_channels, out_channels, 3, 1, 1, 1, true}, rng);
  seq->template emplace<ReLU<T>>("relu1");
  seq->template emplace<Conv2d<T>>("conv2", ConvOptions{out_channels, out_channels, 3, 1, 1, 1, true}, rng);
  seq->template emplace<ReLU<T>>("relu2");
  return seq;
}

// ------------------------------------------------------------- DenseBlock

template <std::floating_point T>
DenseBlock<T>::DenseBlock(const DenseBlockConfig& config, Rng& rng) : config_(config) {
  if (config.in_channels == 0) throw std::invalid_argument("dense_block: input channels must be positive");
  if (config.layers > 0 && config.growth == 0) throw std::invalid_argument("dense_block: growth rate must be positive");
  units_.reserve(config.layers);
  std::size_t features = config.in_channels;
  for (std::size_t l = 0; l < config.layers; ++l) {
    units_.push_back(Unit{BatchNorm2d<T>(features), ReLU<T>(),
                          Conv2d<T>(ConvOptions{features, config.growth, 3, 1, 1, 1, true}, rng)});
    features += config.growth;
  }
}

template <std::floating_point T>
typename DenseBlock<T>::TensorT DenseBlock<T>::forward(const TensorT& x) {
  if (x.rank() != 4 || x.channels() != config_.in_channels) {
    throw ShapeError("dense_block: expected " + std::to_string(config_.in_channels) + " input channels, got " +
                     to_string(x.shape()));
  }
  TensorT features = x;
  for (auto& u : units_) {
    TensorT y = u.conv.forward(u.act.forward(u.norm.forward(features)));
    features = concat_channels(features, y);
  }
  return features;
}

template <std::floating_point T>
typename DenseBlock<T>::TensorT DenseBlock<T>::infer(const TensorT& x) const {
  if (x.rank() != 4 || x.channels() != config_.in_channels) {
    throw ShapeError("dense_block: expected " + std::to_string(config_.in_channels) + " input channels, got " +
                     to_string(x.shape()));
  }
  TensorT features = x;
  for (const auto& u : units_) {
    TensorT y = u.conv.infer(u.act.infer(u.norm.infer(features)));
    features = concat_channels(features, y);
  }
  return features;
}

template <std::floating_point T>
typename DenseBlock<T>::TensorT DenseBlock<T>::backward(const TensorT& grad_out) {
  TensorT g = grad_out;
  for (std::size_t l = units_.size(); l-- > 0;) {
    auto& u = units_[l];
    const std::size_t prev = config_.in_channels + l * config_.growth;
    auto [g_prev, g_new] = split_channels(g, prev);
    TensorT through = u.norm.backward(u.act.backward(u.conv.backward(g_new)));
    accumulate(g_prev, through);
    g = std::move(g_prev);
  }
  return g;
}

template <std::floating_point T>
void DenseBlock<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  for (std::size_t l = 0; l < units_.size(); ++l) {
    const std::string base = join_name(prefix, "layer" + std::to_string(l));
    units_[l].norm.collect(join_name(base, "norm"), out);
    units_[l].conv.collect(join_name(base, "conv"), out);
  }
}

template <std::floating_point T>
void DenseBlock<T>::set_training(bool training) {
  Module<T>::set_training(training);
  for (auto& u : units_) {
    u.norm.set_training(training);
    u.act.set_training(training);
    u.conv.set_training(training);
  }
}

// ------------------------------------------------------------- Transition

template <std::floating_point T>
Transition<T>::Transition(std::size_t in_channels, std::size_t out_channels, Rng& rng)
    : conv_(ConvOptions{in_channels, out_channels, 1, 1, 0, 1, true}, rng) {}

template <std::floating_point T>
typename Transition<T>::TensorT Transition<T>::forward(const TensorT& x) {
  return pool_.forward(conv_.forward(x));
}
template <std::floating_point T>
typename Transition<T>::TensorT Transition<T>::infer(const TensorT& x) const {
  return pool_.infer(conv_.infer(x));
}
template <std::floating_point T>
typename Transition<T>::TensorT Transition<T>::backward(const TensorT& grad_out) {
  return conv_.backward(pool_.backward(grad_out));
}
template <std::floating_point T>
void Transition<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  conv_.collect(join_name(prefix, "conv"), out);
}

// ---------------------------------------------------------------- SEBlock

template <std::floating_point T>
SEBlock<T>::SEBlock(const SEBlockConfig& config, Rng& rng)
    : config_(config),
      w1_({config.bottleneck(), config.channels}),
      w2_({config.channels, config.bottleneck()}),
      w1_grad_(w1_.shape()),
      w2_grad_(w2_.shape()) {
  if (config.channels == 0 || config.reduction == 0) {
    throw std::invalid_argument("se_block: channels and reduction must be positive");
  }
  he_uniform(w1_, config.channels, rng);
  he_uniform(w2_, config.bottleneck(), rng);
}

template <std::floating_point T>
typename SEBlock<T>::Trace SEBlock<T>::run(const TensorT& x) const {
  if (x.rank() != 4 || x.channels() != config_.channels) {
    throw ShapeError("se_block: expected " + std::to_string(config_.channels) + " channels, got " +
                     to_string(x.shape()));
  }
  const std::size_t n = x.batch(), c = config_.channels, b = config_.bottleneck();
  Trace t{global_avg_pool(x), TensorT({n, b}), TensorT({n, c})};
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < b; ++j) {
      T acc = T(0);
      for (std::size_t i = 0; i < c; ++i) acc += w1_[j * c + i] * t.pooled[s * c + i];
      t.hidden_pre[s * b + j] = acc;
    }
    for (std::size_t i = 0; i < c; ++i) {
      T acc = T(0);
      for (std::size_t j = 0; j < b; ++j) {
        const T h = t.hidden_pre[s * b + j];
        acc += w2_[i * b + j] * (h > T(0) ? h : T(0));
      }
      t.gate[s * c + i] = acc;
    }
  }
  t.gate = sigmoid(t.gate);
  return t;
}

template <std::floating_point T>
typename SEBlock<T>::TensorT SEBlock<T>::gate(const TensorT& x) const {
  return run(x).gate;
}

namespace {

template <std::floating_point T>
BasicTensor<T> scale_channels(const BasicTensor<T>& x, const BasicTensor<T>& gate) {
  const std::size_t plane = x.height() * x.width();
  BasicTensor<T> out(x.shape());
  for (std::size_t nc = 0; nc < gate.size(); ++nc) {
    const T g = gate[nc];
    const T* src = x.data() + nc * plane;
    T* dst = out.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * g;
  }
  return out;
}

}  // namespace

template <std::floating_point T>
typename SEBlock<T>::TensorT SEBlock<T>::forward(const TensorT& x) {
  trace_ = run(x);
  input_ = x;
  return scale_channels(x, trace_.gate);
}

template <std::floating_point T>
typename SEBlock<T>::TensorT SEBlock<T>::infer(const TensorT& x) const {
  return scale_channels(x, run(x).gate);
}

template <std::floating_point T>
typename SEBlock<T>::TensorT SEBlock<T>::backward(const TensorT& grad_out) {
  require_same_shape(grad_out.shape(), input_.shape(), "se_block backward");
  const std::size_t n = input_.batch(), c = config_.channels, b = config_.bottleneck();
  const std::size_t plane = input_.height() * input_.width();

  TensorT grad_in = scale_channels(grad_out, trace_.gate);
  std::vector<T> d_pre_gate(n * c), d_hidden(n * b), d_pooled(n * c, T(0));
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    T acc = T(0);
    const T* dy = grad_out.data() + nc * plane;
    const T* xs = input_.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += dy[i] * xs[i];
    const T g = trace_.gate[nc];
    d_pre_gate[nc] = acc * g * (T(1) - g);
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < b; ++j) {
      const T h = trace_.hidden_pre[s * b + j];
      const T h_act = h > T(0) ? h : T(0);
      T acc = T(0);
      for (std::size_t i = 0; i < c; ++i) {
        w2_grad_[i * b + j] += d_pre_gate[s * c + i] * h_act;
        acc += w2_[i * b + j] * d_pre_gate[s * c + i];
      }
      d_hidden[s * b + j] = h > T(0) ? acc : T(0);
    }
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t i = 0; i < c; ++i) {
        w1_grad_[j * c + i] += d_hidden[s * b + j] * trace_.pooled[s * c + i];
        d_pooled[s * c + i] += w1_[j * c + i] * d_hidden[s * b + j];
      }
    }
  }
  const T inv = T(1) / static_cast<T>(plane);
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const T add = d_pooled[nc] * inv;
    T* gi = grad_in.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) gi[i] += add;
  }
  return grad_in;
}

template <std::floating_point T>
void SEBlock<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  out.push_back({join_name(prefix, "squeeze"), &w1_, &w1_grad_});
  out.push_back({join_name(prefix, "excite"), &w2_, &w2_grad_});
}

// ------------------------------------------------------------------- ASPP

template <std::floating_point T>
BasicTensor<T> broadcast_spatial(const BasicTensor<T>& x, std::size_t h, std::size_t w) {
  if (x.rank() != 4 || x.height() != 1 || x.width() != 1) {
    throw ShapeError("broadcast_spatial: expected NxCx1x1 input, got " + to_string(x.shape()));
  }
  BasicTensor<T> out({x.batch(), x.channels(), h, w});
  const std::size_t plane = h * w;
  for (std::size_t nc = 0; nc < x.size(); ++nc) std::fill(out.data() + nc * plane, out.data() + (nc + 1) * plane, x[nc]);
  return out;
}

template <std::floating_point T>
ASPP<T>::ASPP(const ASPPConfig& config, Rng& rng) : config_(config) {
  if (config.rates.empty()) throw std::invalid_argument("aspp: at least one dilation rate is required");
  if (config.in_channels == 0 || config.branch_channels == 0 || config.out_channels == 0) {
    throw std::invalid_argument("aspp: channel counts must be positive");
  }
  for (auto r : config.rates) {
    if (r == 0) throw std::invalid_argument("aspp: dilation rates must be positive");
    branch_convs_.emplace_back(ConvOptions{config.in_channels, config.branch_channels, 3, 1, r, r, true}, rng);
    branch_acts_.emplace_back();
  }
  if (config.image_pooling) {
    pool_conv_.emplace_back(ConvOptions{config.in_channels, config.branch_channels, 1, 1, 0, 1, true}, rng);
    pool_act_.emplace_back();
  }
  fuse_conv_.emplace_back(ConvOptions{config.concat_channels(), config.out_channels, 1, 1, 0, 1, true}, rng);
}

template <std::floating_point T>
typename ASPP<T>::TensorT ASPP<T>::branches(const TensorT& x) const {
  if (x.rank() != 4) throw ShapeError("aspp: expected NxCxHxW input, got " + to_string(x.shape()));
  TensorT cat = branch_acts_[0].infer(branch_convs_[0].infer(x));
  for (std::size_t i = 1; i < branch_convs_.size(); ++i) {
    cat = concat_channels(cat, branch_acts_[i].infer(branch_convs_[i].infer(x)));
  }
  if (config_.image_pooling) {
    TensorT pooled = gap_.infer(x).reshaped({x.batch(), x.channels(), 1, 1});
    TensorT p = pool_act_[0].infer(pool_conv_[0].infer(pooled));
    cat = concat_channels(cat, broadcast_spatial(p, x.height(), x.width()));
  }
  return cat;
}

template <std::floating_point T>
typename ASPP<T>::TensorT ASPP<T>::infer(const TensorT& x) const {
  return fuse_act_.infer(fuse_conv_[0].infer(branches(x)));
}

template <std::floating_point T>
typename ASPP<T>::TensorT ASPP<T>::forward(const TensorT& x) {
  if (x.rank() != 4) throw ShapeError("aspp: expected NxCxHxW input, got " + to_string(x.shape()));
  input_shape_ = x.shape();
  TensorT cat = branch_acts_[0].forward(branch_convs_[0].forward(x));
  for (std::size_t i = 1; i < branch_convs_.size(); ++i) {
    cat = concat_channels(cat, branch_acts_[i].forward(branch_convs_[i].forward(x)));
  }
  if (config_.image_pooling) {
    TensorT pooled = gap_.forward(x).reshaped({x.batch(), x.channels(), 1, 1});
    TensorT p = pool_act_[0].forward(pool_conv_[0].forward(pooled));
    cat = concat_channels(cat, broadcast_spatial(p, x.height(), x.width()));
  }
  return fuse_act_.forward(fuse_conv_[0].forward(cat));
}

template <std::floating_point T>
typename ASPP<T>::TensorT ASPP<T>::backward(const TensorT& grad_out) {
  TensorT g_cat = fuse_conv_[0].backward(fuse_act_.backward(grad_out));
  const std::size_t cb = config_.branch_channels;
  const std::size_t n = input_shape_[0], h = input_shape_[2], w = input_shape_[3];
  TensorT grad_in(input_shape_);
  TensorT rest = std::move(g_cat);
  for (std::size_t i = 0; i < branch_convs_.size(); ++i) {
    auto [mine, tail] = split_channels(rest, cb);
    accumulate(grad_in, branch_convs_[i].backward(branch_acts_[i].backward(mine)));
    rest = std::move(tail);
  }
  if (config_.image_pooling) {
    // Adjoint of the broadcast: sum over the spatial extent.
    TensorT g_pool({n, cb, 1, 1});
    const std::size_t plane = h * w;
    for (std::size_t nc = 0; nc < n * cb; ++nc) {
      T acc = T(0);
      for (std::size_t i = 0; i < plane; ++i) acc += rest[nc * plane + i];
      g_pool[nc] = acc;
    }
    TensorT g_pooled = pool_conv_[0].backward(pool_act_[0].backward(g_pool));
    accumulate(grad_in, gap_.backward(g_pooled.reshaped({n, input_shape_[1]})));
  }
  return grad_in;
}

template <std::floating_point T>
void ASPP<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  for (std::size_t i = 0; i < branch_convs_.size(); ++i) {
    branch_convs_[i].collect(join_name(prefix, "branch" + std::to_string(i)), out);
  }
  if (config_.image_pooling) pool_conv_[0].collect(join_name(prefix, "pool"), out);
  fuse_conv_[0].collect(join_name(prefix, "fuse"), out);
}

#define LSEG_INSTANTIATE(T)                                                                                  \
  template class Sequential<T>;                                                                              \
  template class DenseBlock<T>;                                                                              \
  template class Transition<T>;                                                                              \
  template class SEBlock<T>;                                                                                 \
  template class ASPP<T>;                                                                                    \
  template std::unique_ptr<Sequential<T>> make_double_conv<T>(std::size_t, std::size_t, Rng&);               \
  template BasicTensor<T> broadcast_spatial(const BasicTensor<T>&, std::size_t, std::size_t);

LSEG_INSTANTIATE(float)
LSEG_INSTANTIATE(double)
#undef LSEG_INSTANTIATE

}  // namespace lseg::nn
