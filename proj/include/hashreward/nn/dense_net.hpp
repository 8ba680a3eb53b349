#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hashreward/util/rng.hpp"

namespace hashreward::nn {

// Row-major so that a batch is stored one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using ParameterViews = std::vector<std::span<double>>;
using GradientViews = std::vector<std::span<const double>>;

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2, sigmoid = 3 };

std::string_view to_string(Activation activation);
Activation activation_from_tag(std::uint8_t tag);

// Lipschitz constant of the activation (1 for identity/relu/tanh, 1/4 for sigmoid).
double lipschitz_constant(Activation activation);

struct DenseLayer {
    Matrix weight;  // output_dim x input_dim
    Vector bias;
    Activation activation = Activation::identity;

    std::size_t input_dim() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

class DenseNet {
public:
    DenseNet() = default;
    explicit DenseNet(std::vector<DenseLayer> layers);

    // dims = {input, hidden..., output}; activations.size() == dims.size() - 1.
    static DenseNet xavier(std::span<const std::size_t> dims, std::span<const Activation> activations,
                           Rng& rng);
    static DenseNet zeros(std::span<const std::size_t> dims, std::span<const Activation> activations);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t layer_count() const { return layers_.size(); }
    std::size_t parameter_count() const;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    DenseLayer& layer(std::size_t k) { return layers_.at(k); }
    const DenseLayer& layer(std::size_t k) const { return layers_.at(k); }

    // Weight then bias for each layer, in layer order.
    ParameterViews parameters();

    bool operator==(const DenseNet& other) const;

private:
    std::vector<DenseLayer> layers_;
};

// Per-layer inputs and activated outputs of a batched forward pass.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> outputs;

    const Matrix& output() const { return outputs.back(); }
    std::size_t batch_size() const { return inputs.empty() ? 0 : static_cast<std::size_t>(inputs.front().rows()); }
};

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    static Gradients zeros_like(const DenseNet& net);

    Gradients& operator+=(const Gradients& other);
    void scale(double factor);
    void set_zero();
    GradientViews views() const;
};

struct BackwardResult {
    Gradients gradients;
    Matrix input_gradient;  // dL/d(input), same shape as the forward input
};

struct ForwardResult {
    Vector output;
    ForwardCache cache;
};

// Batched forward; each row of `batch` is one input vector.
ForwardCache forward(const DenseNet& net, const Matrix& batch);
ForwardResult forward(const DenseNet& net, const Vector& input);

// Forward without retaining intermediate activations.
Matrix predict(const DenseNet& net, const Matrix& batch);
Vector predict(const DenseNet& net, const Vector& input);

// Reverse-mode derivatives of `forward`. output_gradient has the shape of cache.output().
BackwardResult backward(const DenseNet& net, const ForwardCache& cache, const Matrix& output_gradient);

// Hash of the relu on/off pattern; changes whenever a perturbation crosses a relu kink.
std::uint64_t activation_pattern(const DenseNet& net, const ForwardCache& cache);

}  // namespace hashreward::nn
