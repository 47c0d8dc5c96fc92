#include "rolllab/optim.hpp"

#include <cmath>

namespace rolllab::grad {

void rmsprop_step(std::vector<Tensor*>& params,
                  const std::vector<std::vector<double>>& grads, RmsPropState& state) {
    if (params.size() != grads.size())
        fail(Error::Kind::shape, "rmsprop_step: params and grads not aligned");
    if (state.mean_square.empty()) {
        state.mean_square.resize(params.size());
        for (size_t i = 0; i < params.size(); i++)
            state.mean_square[i].assign(size_t(params[i]->size()), 0.0);
    }
    for (size_t i = 0; i < params.size(); i++) {
        Tensor& p = *params[i];
        const auto& g = grads[i];
        auto& ms = state.mean_square[i];
        if (g.size() != size_t(p.size()) || ms.size() != g.size())
            fail(Error::Kind::shape, "rmsprop_step: gradient size mismatch");
        for (size_t j = 0; j < g.size(); j++) {
            ms[j] = state.decay * ms[j] + (1 - state.decay) * g[j] * g[j];
            p[int(j)] -= state.learning_rate * g[j] / std::sqrt(ms[j] + state.epsilon);
        }
    }
}

}  // namespace rolllab::grad
