#pragma once

#include <cstdint>
#include <vector>

#include "hashreward/nn/dense_net.hpp"

namespace hashreward::nn {

struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    // Zeroed accumulators shaped like `params`.
    static AdamState for_parameters(const ParameterViews& params, double beta1 = 0.9, double beta2 = 0.999,
                                    double epsilon = 1e-8);
};

// Bias-corrected Adam update in place. A non-finite gradient leaves params and state
// untouched and throws NumericError.
void adam_step(const ParameterViews& params, const GradientViews& gradients, AdamState& state,
               double learning_rate);

// base_rate * (1 - step / total_steps), for step in [0, total_steps).
double linear_decay(double base_rate, std::uint64_t step, std::uint64_t total_steps);

}  // namespace hashreward::nn
