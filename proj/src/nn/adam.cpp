#include "hashreward/nn/adam.hpp"

#include <cmath>
#include <string>

#include "hashreward/errors.hpp"

namespace hashreward::nn {

AdamState AdamState::for_parameters(const ParameterViews& params, double beta1, double beta2, double epsilon) {
    AdamState state;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.epsilon = epsilon;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.size(), 0.0);
        state.second_moment.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(const ParameterViews& params, const GradientViews& gradients, AdamState& state,
               double learning_rate) {
    if (!(learning_rate > 0.0)) throw InputError("adam learning rate must be positive");
    if (params.size() != gradients.size() || params.size() != state.first_moment.size()) {
        throw ConfigurationError("adam: parameter, gradient and state group counts differ");
    }
    for (std::size_t g = 0; g < params.size(); ++g) {
        if (params[g].size() != gradients[g].size() || params[g].size() != state.first_moment[g].size()) {
            throw ConfigurationError("adam: shape mismatch in parameter group " + std::to_string(g));
        }
        for (double v : gradients[g]) {
            if (!std::isfinite(v)) {
                throw NumericError("adam: non-finite gradient in parameter group " + std::to_string(g));
            }
        }
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t g = 0; g < params.size(); ++g) {
        auto& m = state.first_moment[g];
        auto& v = state.second_moment[g];
        const auto& grad = gradients[g];
        auto& p = params[g];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

double linear_decay(double base_rate, std::uint64_t step, std::uint64_t total_steps) {
    if (total_steps == 0) return base_rate;
    if (step >= total_steps) step = total_steps - 1;
    return base_rate * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

}  // namespace hashreward::nn
