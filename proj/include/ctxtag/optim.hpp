#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctxtag/layers.hpp"

namespace ctxtag {

struct AdamConfig {
  double learning_rate = 2.5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamState {
  std::map<std::string, AdamMoments> moments;
  std::size_t t = 0;
};

using NamedGradients = std::map<std::string, std::vector<double>>;

// t += 1, then for every parameter:
//   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
//   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Parameters without an entry in `grads` see g = 0.
void adam_step(NamedTensors& params, const NamedGradients& grads, AdamState& state, const AdamConfig& cfg);

// Same update, reading each tensor's accumulated gradient.
void adam_step(NamedTensors& params, AdamState& state, const AdamConfig& cfg);

}  // namespace ctxtag
