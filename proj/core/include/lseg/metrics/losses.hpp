#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "lseg/tensor.hpp"

namespace lseg::metrics {

enum class LossKind { kBce, kWce, kDice, kCombined };

const char* to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::kCombined;
  /// Weight of the positive (landslide) term in WCE.
  double pos_weight = 1.0;
  /// When set, WCE scales both terms by pos_weight instead of only the
  /// positive one.
  bool wce_scale_both = false;
  double dice_eps = 1.0;
  /// Combined loss = (1 - alpha) * WCE + alpha * Dice.
  double alpha = 0.5;
  /// Probabilities are clamped to [delta, 1 - delta] before any logarithm.
  double clamp_delta = 1e-7;

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

void to_json(nlohmann::json& j, const LossConfig& cfg);
void from_json(const nlohmann::json& j, LossConfig& cfg);

/// Loss value and its gradient with respect to the predicted probabilities.
template <std::floating_point T>
struct LossResult {
  double value = 0.0;
  BasicTensor<T> grad;
};

/// -mean[y log p + (1-y) log(1-p)] on clamped p. The gradient is zero where
/// the clamp is active.
template <std::floating_point T>
LossResult<T> bce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double delta = 1e-7);

/// -mean[w y log p + (1-y) log(1-p)], or -mean[w (y log p + (1-y) log(1-p))]
/// when scale_both is set.
template <std::floating_point T>
LossResult<T> wce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double pos_weight,
                       double delta = 1e-7, bool scale_both = false);

/// 1 - (2 sum(y p) + eps) / (sum(y) + sum(p) + eps), on soft predictions.
template <std::floating_point T>
LossResult<T> dice_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double eps = 1.0);

template <std::floating_point T>
LossResult<T> combined_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, const LossConfig& cfg);

/// Dispatches on cfg.kind.
template <std::floating_point T>
LossResult<T> compute_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, const LossConfig& cfg);

}  // namespace lseg::metrics
