#include "lseg/train/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace lseg::train {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in (0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adam eps must be positive");
}

template <std::floating_point T>
void adam_update(BasicTensor<T>& theta, const BasicTensor<T>& grad, BasicTensor<T>& m, BasicTensor<T>& v,
                 const AdamConfig& cfg, std::size_t t) {
  require_same_shape(theta.shape(), grad.shape(), "adam gradient");
  require_same_shape(theta.shape(), m.shape(), "adam first moment");
  require_same_shape(theta.shape(), v.shape(), "adam second moment");
  if (t < 1) throw std::invalid_argument("adam step index must be at least 1");
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double mi = b1 * m[i] + (1.0 - b1) * g;
    const double vi = b2 * v[i] + (1.0 - b2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / c1;
    const double v_hat = vi / c2;
    theta[i] = static_cast<T>(theta[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

template <std::floating_point T>
void Adam<T>::step(std::span<const nn::Parameter<T>> params) {
  std::size_t k = 0;
  const bool fresh = m_.empty();
  ++t_;
  for (const auto& p : params) {
    if (!p.grad) continue;
    if (fresh) {
      m_.push_back(BasicTensor<T>::zeros_like(*p.value));
      v_.push_back(BasicTensor<T>::zeros_like(*p.value));
    }
    if (k >= m_.size()) throw std::logic_error("adam: parameter list grew between steps");
    adam_update(*p.value, *p.grad, m_[k], v_[k], cfg_, t_);
    ++k;
  }
  if (k != m_.size()) throw std::logic_error("adam: parameter list shrank between steps");
}

template void adam_update<float>(BasicTensor<float>&, const BasicTensor<float>&, BasicTensor<float>&,
                                 BasicTensor<float>&, const AdamConfig&, std::size_t);
template void adam_update<double>(BasicTensor<double>&, const BasicTensor<double>&, BasicTensor<double>&,
                                  BasicTensor<double>&, const AdamConfig&, std::size_t);
template class Adam<float>;
template class Adam<double>;

}  // namespace lseg::train
