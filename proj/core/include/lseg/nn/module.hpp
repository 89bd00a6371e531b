#pragma once

#include <concepts>
#include <memory>
#include <string>
#include <vector>

#include "lseg/tensor.hpp"

namespace lseg::nn {

/// Named view of a trainable tensor (grad != nullptr) or a persistent
/// buffer such as batch-norm running statistics (grad == nullptr).
template <std::floating_point T>
struct Parameter {
  std::string name;
  BasicTensor<T>* value = nullptr;
  BasicTensor<T>* grad = nullptr;
};

/// Differentiable layer.
///
/// forward() records whatever backward() needs, so one instance must not be
/// driven from two threads at once. infer() is const, records nothing and
/// always uses evaluation semantics; it is safe to call concurrently.
template <std::floating_point T>
class Module {
 public:
  using TensorT = BasicTensor<T>;

  virtual ~Module() = default;

  virtual TensorT forward(const TensorT& x) = 0;
  virtual TensorT infer(const TensorT& x) const = 0;
  /// Returns the gradient w.r.t. the last forward() input and accumulates
  /// parameter gradients.
  virtual TensorT backward(const TensorT& grad_out) = 0;

  virtual void collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual void set_training(bool training) { training_ = training; }
  bool training() const noexcept { return training_; }

  std::vector<Parameter<T>> parameters() {
    std::vector<Parameter<T>> out;
    collect("", out);
    return out;
  }
  void zero_grad() {
    for (auto& p : parameters()) {
      if (p.grad) *p.grad = TensorT::zeros_like(*p.value);
    }
  }

 protected:
  bool training_ = true;
};

template <std::floating_point T>
using ModulePtr = std::unique_ptr<Module<T>>;

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace lseg::nn
