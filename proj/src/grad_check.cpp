#include "ctxtag/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ctxtag/error.hpp"

namespace ctxtag {

std::vector<double> numeric_gradient(const ScalarFn& f, Tensor& input, double h) {
  NoGradGuard no_grad;
  auto values = input.mutable_data();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double plus = f().item();
    values[i] = saved - h;
    const double minus = f().item();
    values[i] = saved;
    out[i] = (plus - minus) / (2.0 * h);
  }
  return out;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ShapeError("gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double err = std::fabs(a - n) / std::max(1e-8, std::fabs(a) + std::fabs(n));
    worst = std::max(worst, err);
  }
  return worst;
}

double grad_check(const ScalarFn& f, std::span<Tensor> inputs, double h) {
  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  f().backward();
  double worst = 0.0;
  for (Tensor& t : inputs) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    const auto numeric = numeric_gradient(f, t, h);
    worst = std::max(worst, max_relative_error(analytic, numeric));
  }
  return worst;
}

}  // namespace ctxtag
