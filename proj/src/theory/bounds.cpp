#include "hashreward/theory/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hashreward/errors.hpp"
#include "hashreward/util/rng.hpp"

namespace hashreward::theory {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void SpectralComplexityInput::validate() const {
    const auto n = spectral_norms.size();
    if (n < 1) throw InputError("spectral complexity needs at least one layer");
    if (two_one_norms.size() != n || lipschitz.size() != n) throw InputError("per-layer bound lists differ in length");
    if (max_dimension < 1) throw InputError("max dimension must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
        if (!positive_finite(spectral_norms[i]) || !positive_finite(two_one_norms[i]) || !positive_finite(lipschitz[i])) {
            throw InputError("layer " + std::to_string(i) + ": bounds must be positive and finite");
        }
    }
}

double spectral_complexity(const SpectralComplexityInput& input) {
    input.validate();
    const double m = static_cast<double>(input.max_dimension);
    double product = 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < input.layer_count(); ++i) {
        product *= input.spectral_norms[i] * input.lipschitz[i];
        sum += std::pow(input.two_one_norms[i] / input.spectral_norms[i], 2.0 / 3.0);
    }
    return std::sqrt(std::log(2.0 * m * m)) * product * std::pow(sum, 1.5);
}

double feature_frobenius(const nn::Matrix& mapped_features) {
    if (!mapped_features.allFinite()) throw InputError("feature matrix has non-finite entries");
    return mapped_features.norm();
}

nn::Matrix trajectory_feature_matrix(std::span<const nn::Matrix> per_trajectory_features) {
    if (per_trajectory_features.empty()) throw InputError("no trajectories");
    const auto dim = per_trajectory_features.front().cols();
    Eigen::Index longest = 0;
    for (const auto& f : per_trajectory_features) {
        if (f.cols() != dim) throw InputError("trajectories disagree on the feature dimension");
        longest = std::max(longest, f.rows());
    }
    nn::Matrix out = nn::Matrix::Zero(static_cast<Eigen::Index>(per_trajectory_features.size()), longest * dim);
    for (std::size_t t = 0; t < per_trajectory_features.size(); ++t) {
        const auto& f = per_trajectory_features[t];
        for (Eigen::Index r = 0; r < f.rows(); ++r) out.block(static_cast<Eigen::Index>(t), r * dim, 1, dim) = f.row(r);
    }
    return out;
}

double minimum_sample_count(double frobenius, double complexity) { return 3.0 * frobenius * complexity; }

double rademacher_bound(double frobenius, double complexity, double m) {
    if (!positive_finite(frobenius) || !positive_finite(complexity)) {
        throw InputError("frobenius norm and complexity must be positive");
    }
    const double scale = minimum_sample_count(frobenius, complexity);
    if (!(m >= scale)) {
        char buffer[160];
        std::snprintf(buffer, sizeof(buffer), "sample count m = %.6g is below the admissible minimum 3*||phi(X)||_F*R = %.6g",
                      m, scale);
        throw DomainError(buffer);
    }
    return 24.0 * frobenius * complexity / m * (1.0 + std::log(m / scale));
}

void BoundInputs::validate() const {
    for (double v : {m, delta, sup_bound, gap_delta1, gap_delta2, training_slack, feature_frobenius, complexity}) {
        if (!std::isfinite(v)) throw InputError("bound inputs must be finite");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
    if (!(sup_bound > 0.0)) throw InputError("sup_bound must be positive");
    if (gap_delta1 < 0.0 || gap_delta2 < 0.0 || training_slack < 0.0) {
        throw InputError("gap_delta1, gap_delta2 and training_slack must be >= 0");
    }
    if (!(feature_frobenius > 0.0) || !(complexity > 0.0)) throw InputError("feature_frobenius and complexity must be positive");
    if (!(m > 0.0)) throw InputError("m must be positive");
}

BoundTerms generalization_bound_terms(const BoundInputs& inputs) {
    inputs.validate();
    BoundTerms t;
    t.gap_delta1 = inputs.gap_delta1;
    t.gap_delta2 = inputs.gap_delta2;
    t.concentration = 6.0 * inputs.sup_bound * std::sqrt(std::log(2.0 / inputs.delta) / (2.0 * inputs.m));
    t.rademacher = rademacher_bound(inputs.feature_frobenius, inputs.complexity, inputs.m);
    t.training_slack = inputs.training_slack;
    t.total = t.gap_delta1 + t.gap_delta2 + t.concentration + t.rademacher + t.training_slack;
    return t;
}

double generalization_bound(const BoundInputs& inputs) { return generalization_bound_terms(inputs).total; }

double spectral_norm(const nn::Matrix& weight, double tolerance, std::size_t max_iterations) {
    if (!weight.allFinite()) throw NumericError("spectral norm of a non-finite matrix");
    if (weight.size() == 0 || weight.isZero(0.0)) return 0.0;
    Rng rng = make_rng(0x5350454354524CULL);
    nn::Vector v(weight.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 2.0 * uniform01(rng) - 1.0;
    v.normalize();
    double estimate = (weight * v).norm();
    double residual = 0.0;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        nn::Vector w = weight.transpose() * (weight * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const double next = (weight * v).norm();
        residual = std::abs(next - estimate) / next;
        estimate = next;
        if (residual < tolerance) return estimate;
    }
    throw NumericError("power iteration did not converge after " + std::to_string(max_iterations) +
                       " iterations, relative residual " + std::to_string(residual));
}

double two_one_norm_of_transpose(const nn::Matrix& weight) { return weight.rowwise().norm().sum(); }

ComplexityReport model_complexity_report(const nn::DenseNet& net) {
    ComplexityReport report;
    for (const auto& layer : net.layers()) {
        if (!layer.weight.allFinite()) throw NumericError("network has non-finite weights");
        report.input.spectral_norms.push_back(spectral_norm(layer.weight));
        report.input.two_one_norms.push_back(two_one_norm_of_transpose(layer.weight));
        report.input.lipschitz.push_back(nn::lipschitz_constant(layer.activation));
        report.input.max_dimension = std::max({report.input.max_dimension, layer.input_dim(), layer.output_dim()});
    }
    report.complexity = spectral_complexity(report.input);
    return report;
}

BoundInputs bound_inputs_from(const KeyValues& values) {
    BoundInputs inputs;
    for (const auto& [key, value] : values) {
        const double v = parse_real(key, value);
        if (key == "m") inputs.m = v;
        else if (key == "delta") inputs.delta = v;
        else if (key == "sup_bound") inputs.sup_bound = v;
        else if (key == "gap_delta1") inputs.gap_delta1 = v;
        else if (key == "gap_delta2") inputs.gap_delta2 = v;
        else if (key == "training_slack") inputs.training_slack = v;
        else if (key == "feature_frobenius") inputs.feature_frobenius = v;
        else if (key == "complexity") inputs.complexity = v;
        else throw InputError("unknown bound input key '" + key + "'");
    }
    return inputs;
}

std::string format_bound_report(const ComplexityReport& report, const BoundInputs& inputs, const BoundTerms& terms) {
    std::ostringstream out;
    out.precision(10);
    out << "layers = " << report.input.layer_count() << '\n';
    for (std::size_t i = 0; i < report.input.layer_count(); ++i) {
        out << "layer " << i << ": spectral_norm = " << report.input.spectral_norms[i]
            << ", two_one_norm = " << report.input.two_one_norms[i] << ", lipschitz = " << report.input.lipschitz[i] << '\n';
    }
    out << "max_dimension = " << report.input.max_dimension << '\n';
    out << "complexity_R = " << inputs.complexity << '\n';
    out << "feature_frobenius = " << inputs.feature_frobenius << '\n';
    out << "m = " << inputs.m << '\n';
    out << "delta = " << inputs.delta << '\n';
    out << "term_gap_delta1 (input) = " << terms.gap_delta1 << '\n';
    out << "term_gap_delta2 (input) = " << terms.gap_delta2 << '\n';
    out << "term_concentration = " << terms.concentration << '\n';
    out << "term_rademacher = " << terms.rademacher << '\n';
    out << "term_training_slack (input) = " << terms.training_slack << '\n';
    out << "bound = " << terms.total << '\n';
    return out.str();
}

}  // namespace hashreward::theory
