#pragma once

#include <span>
#include <vector>

#include "lseg/nn/module.hpp"

namespace lseg::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws std::invalid_argument unless lr > 0 and 0 < beta < 1.
  void validate() const;
};

/// One Adam update of a single tensor at step t >= 1:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// with m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t).
template <std::floating_point T>
void adam_update(BasicTensor<T>& theta, const BasicTensor<T>& grad, BasicTensor<T>& m, BasicTensor<T>& v,
                 const AdamConfig& cfg, std::size_t t);

/// Adam over a fixed parameter list. Buffers (grad == nullptr) are skipped.
template <std::floating_point T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  /// Applies one step to every trainable parameter. The list must be the same
  /// (same order and shapes) on every call.
  void step(std::span<const nn::Parameter<T>> params);

  std::size_t steps() const noexcept { return t_; }
  AdamConfig& config() noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<BasicTensor<T>> m_;
  std::vector<BasicTensor<T>> v_;
};

}  // namespace lseg::train
