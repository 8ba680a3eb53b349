#include "hashreward/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hashreward/errors.hpp"

namespace hashreward::nn {

GradientCheckResult gradient_check(const ParameterViews& params, const GradientViews& analytic,
                                   const std::function<ProbeEvaluation()>& evaluate,
                                   const GradientCheckOptions& options) {
    if (params.size() != analytic.size()) throw ConfigurationError("gradient check: group count mismatch");
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t g = 0; g < params.size(); ++g) {
        if (params[g].size() != analytic[g].size()) throw ConfigurationError("gradient check: shape mismatch");
        for (std::size_t i = 0; i < params[g].size(); ++i) all.emplace_back(g, i);
    }
    if (all.size() > options.max_probes) {
        Rng rng = make_rng(options.seed, 0x6772616463686bULL);
        shuffle(all.begin(), all.end(), rng);
        all.resize(options.max_probes);
    }

    const auto baseline = evaluate();
    const double eps = options.probe_epsilon;
    GradientCheckResult result;
    for (const auto& [g, i] : all) {
        double& p = params[g][i];
        const double saved = p;
        p = saved + eps;
        const auto plus = evaluate();
        p = saved - eps;
        const auto minus = evaluate();
        p = saved;
        if (plus.piece != baseline.piece || minus.piece != baseline.piece) {
            ++result.skipped;
            continue;
        }
        const double numeric = (plus.loss - minus.loss) / (2.0 * eps);
        const double exact = analytic[g][i];
        const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(exact - numeric) / denom);
        ++result.probes;
    }
    return result;
}

double gradient_check(DenseNet& net, const OutputLoss& loss, const Matrix& input, double probe_epsilon,
                      std::size_t max_probes, std::uint64_t seed) {
    const auto cache = forward(net, input);
    const auto [value, output_gradient] = loss(cache.output());
    const auto grads = backward(net, cache, output_gradient).gradients;
    const auto evaluate = [&]() {
        const auto probe = forward(net, input);
        return ProbeEvaluation{loss(probe.output()).first, activation_pattern(net, probe)};
    };
    GradientCheckOptions options;
    options.probe_epsilon = probe_epsilon;
    options.max_probes = max_probes;
    options.seed = seed;
    return gradient_check(net.parameters(), grads.views(), evaluate, options).max_relative_error;
}

}  // namespace hashreward::nn
