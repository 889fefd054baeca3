#include "ctxtag/optim.hpp"

#include <cmath>

#include "ctxtag/error.hpp"

namespace ctxtag {

void adam_step(NamedTensors& params, const NamedGradients& grads, AdamState& state, const AdamConfig& cfg) {
  if (cfg.learning_rate < 0.0 || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) ||
      cfg.eps <= 0.0) {
    throw UsageError("invalid Adam settings");
  }
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("gradient for unknown parameter '" + name + "'");
    if (g.size() != it->second.numel()) {
      throw ShapeError("gradient for '" + name + "' has " + std::to_string(g.size()) + " values, parameter has " +
                       std::to_string(it->second.numel()));
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    auto values = p.mutable_data();
    AdamMoments& mom = state.moments[name];
    if (mom.m.empty()) {
      mom.m.assign(values.size(), 0.0);
      mom.v.assign(values.size(), 0.0);
    } else if (mom.m.size() != values.size()) {
      throw ShapeError("Adam state for '" + name + "' does not match the parameter shape");
    }
    auto g_it = grads.find(name);
    const std::vector<double>* g = g_it == grads.end() ? nullptr : &g_it->second;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * gi;
      mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = mom.m[i] / bias1;
      const double v_hat = mom.v[i] / bias2;
      values[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void adam_step(NamedTensors& params, AdamState& state, const AdamConfig& cfg) {
  NamedGradients grads;
  for (const auto& [name, p] : params) {
    if (p.has_grad()) grads.emplace(name, std::vector<double>(p.grad().begin(), p.grad().end()));
  }
  adam_step(params, grads, state, cfg);
}

}  // namespace ctxtag
