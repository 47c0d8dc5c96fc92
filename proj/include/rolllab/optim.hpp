#pragma once

#include <vector>

#include "rolllab/tensor.hpp"

namespace rolllab::grad {

// RMSProp with a running mean of squared gradients per parameter entry.
struct RmsPropState {
    double decay = 0.9;
    double epsilon = 1e-8;
    double learning_rate = 1e-4;
    std::vector<std::vector<double>> mean_square;  // one slot per parameter
};

// param <- param - lr * g / sqrt(mean_square + eps),
// mean_square <- decay * mean_square + (1 - decay) * g^2
void rmsprop_step(std::vector<Tensor*>& params,
                  const std::vector<std::vector<double>>& grads, RmsPropState& state);

}  // namespace rolllab::grad
