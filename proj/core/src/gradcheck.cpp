#include "lseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lseg {

namespace {

double checked(double v, const char* where, std::size_t index) {
  if (!std::isfinite(v)) {
    throw NonFiniteError(std::string("finite_diff_check: non-finite ") + where + " at element " +
                         std::to_string(index));
  }
  return v;
}

}  // namespace

GradCheckReport finite_diff_check(const DifferentiableFn& f, const Tensor64& x, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be positive");
  checked(f.value(x), "value", 0);
  const Tensor64 analytic = f.gradient(x);
  require_same_shape(analytic.shape(), x.shape(), "finite_diff_check gradient");

  GradCheckReport report;
  Tensor64 probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + epsilon;
    const double plus = checked(f.value(probe), "value", i);
    probe[i] = original - epsilon;
    const double minus = checked(f.value(probe), "value", i);
    probe[i] = original;

    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double a = checked(analytic[i], "analytic gradient", i);
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
    if (i == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.analytic_at_worst = a;
      report.numeric_at_worst = numeric;
    }
  }
  return report;
}

}  // namespace lseg
