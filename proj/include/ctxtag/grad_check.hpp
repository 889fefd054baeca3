#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ctxtag/tensor.hpp"

namespace ctxtag {

using ScalarFn = std::function<Tensor()>;

// Central-difference gradient of f with respect to every element of `input`.
// f must read `input` through a shared handle so in-place perturbation
// reaches it.
std::vector<double> numeric_gradient(const ScalarFn& f, Tensor& input, double h = 1e-6);

// max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|)
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

// Backpropagates f once and compares every input's analytic gradient with
// central differences. Returns the worst relative error across all inputs.
double grad_check(const ScalarFn& f, std::span<Tensor> inputs, double h = 1e-6);

}  // namespace ctxtag
