#include "lseg/metrics/losses.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace lseg::metrics {

const char* to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kBce: return "bce";
    case LossKind::kWce: return "wce";
    case LossKind::kDice: return "dice";
    case LossKind::kCombined: return "combined";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "bce") return LossKind::kBce;
  if (name == "wce") return LossKind::kWce;
  if (name == "dice") return LossKind::kDice;
  if (name == "combined") return LossKind::kCombined;
  throw std::invalid_argument("unknown loss '" + name + "' (expected bce, wce, dice or combined)");
}

void LossConfig::validate() const {
  if (!(pos_weight > 0.0)) throw std::invalid_argument("loss pos_weight must be positive");
  if (!(dice_eps > 0.0)) throw std::invalid_argument("loss dice_eps must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("loss alpha must lie in [0, 1]");
  if (!(clamp_delta > 0.0 && clamp_delta < 0.5)) throw std::invalid_argument("loss clamp_delta must lie in (0, 0.5)");
}

void to_json(nlohmann::json& j, const LossConfig& cfg) {
  j = nlohmann::json{{"kind", to_string(cfg.kind)},     {"pos_weight", cfg.pos_weight},
                     {"wce_scale_both", cfg.wce_scale_both}, {"dice_eps", cfg.dice_eps},
                     {"alpha", cfg.alpha},              {"clamp_delta", cfg.clamp_delta}};
}

void from_json(const nlohmann::json& j, LossConfig& cfg) {
  const LossConfig d;
  cfg.kind = parse_loss_kind(j.value("kind", std::string(to_string(d.kind))));
  cfg.pos_weight = j.value("pos_weight", d.pos_weight);
  cfg.wce_scale_both = j.value("wce_scale_both", d.wce_scale_both);
  cfg.dice_eps = j.value("dice_eps", d.dice_eps);
  cfg.alpha = j.value("alpha", d.alpha);
  cfg.clamp_delta = j.value("clamp_delta", d.clamp_delta);
}

template <std::floating_point T>
LossResult<T> wce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double pos_weight, double delta,
                       bool scale_both) {
  require_same_shape(pred.shape(), target.shape(), "cross-entropy loss");
  const double n = static_cast<double>(pred.size());
  const double wp = pos_weight;
  const double wn = scale_both ? pos_weight : 1.0;
  LossResult<T> r{0.0, BasicTensor<T>(pred.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p_raw = pred[i];
    const double p = std::clamp(p_raw, delta, 1.0 - delta);
    const double y = target[i];
    total -= wp * y * std::log(p) + wn * (1.0 - y) * std::log(1.0 - p);
    if (p_raw >= delta && p_raw <= 1.0 - delta) {
      r.grad[i] = static_cast<T>((-wp * y / p + wn * (1.0 - y) / (1.0 - p)) / n);
    }
  }
  r.value = total / n;
  return r;
}

template <std::floating_point T>
LossResult<T> bce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double delta) {
  return wce_loss(pred, target, 1.0, delta, false);
}

template <std::floating_point T>
LossResult<T> dice_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double eps) {
  require_same_shape(pred.shape(), target.shape(), "dice loss");
  double inter = 0.0, sum_y = 0.0, sum_p = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += static_cast<double>(pred[i]) * target[i];
    sum_y += target[i];
    sum_p += pred[i];
  }
  const double num = 2.0 * inter + eps;
  const double den = sum_y + sum_p + eps;
  LossResult<T> r{1.0 - num / den, BasicTensor<T>(pred.shape())};
  const double den2 = den * den;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.grad[i] = static_cast<T>(-(2.0 * target[i] * den - num) / den2);
  }
  return r;
}

template <std::floating_point T>
LossResult<T> combined_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, const LossConfig& cfg) {
  const double a = cfg.alpha;
  auto w = wce_loss(pred, target, cfg.pos_weight, cfg.clamp_delta, cfg.wce_scale_both);
  const auto d = dice_loss(pred, target, cfg.dice_eps);
  LossResult<T> r{(1.0 - a) * w.value + a * d.value, BasicTensor<T>(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.grad[i] = static_cast<T>((1.0 - a) * w.grad[i] + a * d.grad[i]);
  }
  return r;
}

template <std::floating_point T>
LossResult<T> compute_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, const LossConfig& cfg) {
  switch (cfg.kind) {
    case LossKind::kBce: return bce_loss(pred, target, cfg.clamp_delta);
    case LossKind::kWce: return wce_loss(pred, target, cfg.pos_weight, cfg.clamp_delta, cfg.wce_scale_both);
    case LossKind::kDice: return dice_loss(pred, target, cfg.dice_eps);
    case LossKind::kCombined: return combined_loss(pred, target, cfg);
  }
  throw std::invalid_argument("unknown loss kind");
}

#define LSEG_INSTANTIATE(T)                                                                                   \
  template LossResult<T> bce_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&, double);                  \
  template LossResult<T> wce_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&, double, double, bool);    \
  template LossResult<T> dice_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&, double);                 \
  template LossResult<T> combined_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&, const LossConfig&);  \
  template LossResult<T> compute_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&, const LossConfig&);

LSEG_INSTANTIATE(float)
LSEG_INSTANTIATE(double)
#undef LSEG_INSTANTIATE

}  // namespace lseg::metrics
