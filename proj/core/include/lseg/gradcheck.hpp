#pragma once

#include <functional>
#include <stdexcept>

#include "lseg/tensor.hpp"

namespace lseg {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar function of a tensor together with its analytic gradient.
struct DifferentiableFn {
  std::function<double(const Tensor64&)> value;
  std::function<Tensor64(const Tensor64&)> gradient;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Compares the analytic gradient against central differences, element by
/// element. The error metric is |analytic - numeric| / max(1, |numeric|).
/// Throws NonFiniteError if any evaluation is NaN or infinite.
GradCheckReport finite_diff_check(const DifferentiableFn& f, const Tensor64& x, double epsilon = 1e-5);

}  // namespace lseg
