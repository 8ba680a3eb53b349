#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>

#include "hashreward/nn/dense_net.hpp"

namespace hashreward::nn {

// Loss at the current parameter values plus an identifier of the smooth piece the
// evaluation landed in (relu patterns, clamps, hinge branches). Probes whose +/- perturbation
// leaves the baseline piece are skipped, since finite differences are invalid across kinks.
struct ProbeEvaluation {
    double loss = 0.0;
    std::uint64_t piece = 0;
};

struct GradientCheckOptions {
    double probe_epsilon = 1e-5;
    std::size_t max_probes = 256;
    std::uint64_t seed = 0;
};

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::size_t probes = 0;
    std::size_t skipped = 0;
};

// Central differences on a sampled subset of parameters against `analytic`.
// relative error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradientCheckResult gradient_check(const ParameterViews& params, const GradientViews& analytic,
                                   const std::function<ProbeEvaluation()>& evaluate,
                                   const GradientCheckOptions& options = {});

// Loss over the network output: returns (loss, dLoss/dOutput).
using OutputLoss = std::function<std::pair<double, Matrix>(const Matrix& output)>;

double gradient_check(DenseNet& net, const OutputLoss& loss, const Matrix& input, double probe_epsilon,
                      std::size_t max_probes = 256, std::uint64_t seed = 0);

}  // namespace hashreward::nn
