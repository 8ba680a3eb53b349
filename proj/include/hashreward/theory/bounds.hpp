#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hashreward/nn/dense_net.hpp"
#include "hashreward/util/key_value.hpp"

namespace hashreward::theory {

// Per-layer bounds of a layered network class. Reference matrices are zero, so the
// (2,1) bound is on ||W^T||_{2,1} itself.
struct SpectralComplexityInput {
    std::vector<double> spectral_norms;  // s_i
    std::vector<double> two_one_norms;   // b_i
    std::vector<double> lipschitz;       // rho_i
    std::size_t max_dimension = 1;       // M

    std::size_t layer_count() const { return spectral_norms.size(); }
    void validate() const;
};

// sqrt(ln(2 M^2)) * prod(s_i rho_i) * (sum (b_i / s_i)^(2/3))^(3/2)
double spectral_complexity(const SpectralComplexityInput& input);

double feature_frobenius(const nn::Matrix& mapped_features);

// Trajectory granularity: one row per trajectory, its per-state features concatenated and
// zero-padded to the longest trajectory. Every entry appears once, so the norm equals the
// per-state one; the matrix is what changes.
nn::Matrix trajectory_feature_matrix(std::span<const nn::Matrix> per_trajectory_features);

// Smallest admissible sample count, 3 * frobenius * complexity.
double minimum_sample_count(double frobenius, double complexity);

// 24 F R / m * (1 + ln(m / (3 F R))); DomainError when m < 3 F R.
double rademacher_bound(double frobenius, double complexity, double m);

struct BoundInputs {
    double m = 0.0;                  // demonstration trajectories
    double delta = 0.05;             // failure probability
    double sup_bound = 1.0;          // Delta, sup-norm bound of the discriminator class
    double gap_delta1 = 0.0;         // Delta_1, user-supplied
    double gap_delta2 = 0.0;         // Delta_2, user-supplied
    double training_slack = 0.0;     // eta, user-supplied
    double feature_frobenius = 0.0;  // ||phi(X)||_F
    double complexity = 0.0;         // R

    void validate() const;
};

struct BoundTerms {
    double gap_delta1 = 0.0;
    double gap_delta2 = 0.0;
    double concentration = 0.0;  // 6 Delta sqrt(ln(2/delta) / (2m))
    double rademacher = 0.0;
    double training_slack = 0.0;
    double total = 0.0;
};

BoundTerms generalization_bound_terms(const BoundInputs& inputs);
double generalization_bound(const BoundInputs& inputs);

// Largest singular value by power iteration on W^T W. Stops when the relative change of the
// estimate is below `tolerance`; NumericError with the residual if max_iterations is hit.
double spectral_norm(const nn::Matrix& weight, double tolerance = 1e-8, std::size_t max_iterations = 1000);

// ||W^T||_{2,1}: sum of the column 2-norms of W^T (the row norms of W).
double two_one_norm_of_transpose(const nn::Matrix& weight);

struct ComplexityReport {
    SpectralComplexityInput input;
    double complexity = 0.0;
};

ComplexityReport model_complexity_report(const nn::DenseNet& net);

// Fields of BoundInputs by name; missing feature_frobenius/complexity stay 0 for the caller to fill.
BoundInputs bound_inputs_from(const KeyValues& values);

// One line per term of the bound, then the total.
std::string format_bound_report(const ComplexityReport& report, const BoundInputs& inputs, const BoundTerms& terms);

}  // namespace hashreward::theory
