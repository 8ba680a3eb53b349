#include "hashreward/nn/dense_net.hpp"

#include <cmath>
#include <string>

#include "hashreward/errors.hpp"

namespace hashreward::nn {

std::string_view to_string(Activation activation) {
    switch (activation) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "unknown";
}

Activation activation_from_tag(std::uint8_t tag) {
    if (tag > static_cast<std::uint8_t>(Activation::sigmoid)) {
        throw ConfigurationError("unknown activation tag " + std::to_string(tag));
    }
    return static_cast<Activation>(tag);
}

double lipschitz_constant(Activation activation) {
    return activation == Activation::sigmoid ? 0.25 : 1.0;
}

namespace {

void apply_activation(Matrix& z, Activation activation) {
    switch (activation) {
        case Activation::identity: break;
        case Activation::relu: z = z.cwiseMax(0.0); break;
        case Activation::tanh: z = z.array().tanh().matrix(); break;
        case Activation::sigmoid: z = (1.0 / (1.0 + (-z.array()).exp())).matrix(); break;
    }
}

// In-place multiply of dL/dy by dy/dz, expressed through the activated output y.
void apply_derivative(Matrix& grad, const Matrix& y, Activation activation) {
    switch (activation) {
        case Activation::identity: break;
        case Activation::relu: grad = (y.array() > 0.0).select(grad, 0.0); break;
        case Activation::tanh: grad.array() *= 1.0 - y.array().square(); break;
        case Activation::sigmoid: grad.array() *= y.array() * (1.0 - y.array()); break;
    }
}

void check_dims(std::span<const std::size_t> dims, std::span<const Activation> activations) {
    if (dims.size() < 2 || activations.size() + 1 != dims.size()) {
        throw ConfigurationError("dense net needs dims.size() == activations.size() + 1 >= 2");
    }
}

}  // namespace

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        if (static_cast<std::size_t>(layers_[k].bias.size()) != layers_[k].output_dim()) {
            throw ConfigurationError("layer " + std::to_string(k) + ": bias length does not match weight rows");
        }
        if (k > 0 && layers_[k].input_dim() != layers_[k - 1].output_dim()) {
            throw ConfigurationError("layer " + std::to_string(k) + ": input dim " +
                                     std::to_string(layers_[k].input_dim()) + " does not chain with " +
                                     std::to_string(layers_[k - 1].output_dim()));
        }
        if (!layers_[k].weight.allFinite() || !layers_[k].bias.allFinite()) {
            throw NumericError("layer " + std::to_string(k) + " has non-finite parameters");
        }
    }
}

DenseNet DenseNet::xavier(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng) {
    check_dims(dims, activations);
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const auto fan_in = dims[k];
        const auto fan_out = dims[k + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer;
        layer.weight.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
            layer.weight.data()[i] = limit * (2.0 * uniform01(rng) - 1.0);
        }
        layer.bias = Vector::Zero(static_cast<Eigen::Index>(fan_out));
        layer.activation = activations[k];
        layers.push_back(std::move(layer));
    }
    return DenseNet(std::move(layers));
}

DenseNet DenseNet::zeros(std::span<const std::size_t> dims, std::span<const Activation> activations) {
    check_dims(dims, activations);
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer layer;
        layer.weight = Matrix::Zero(static_cast<Eigen::Index>(dims[k + 1]), static_cast<Eigen::Index>(dims[k]));
        layer.bias = Vector::Zero(static_cast<Eigen::Index>(dims[k + 1]));
        layer.activation = activations[k];
        layers.push_back(std::move(layer));
    }
    return DenseNet(std::move(layers));
}

std::size_t DenseNet::input_dim() const {
    return layers_.empty() ? 0 : layers_.front().input_dim();
}

std::size_t DenseNet::output_dim() const {
    return layers_.empty() ? 0 : layers_.back().output_dim();
}

std::size_t DenseNet::parameter_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers_) count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return count;
}

ParameterViews DenseNet::parameters() {
    ParameterViews views;
    views.reserve(2 * layers_.size());
    for (auto& layer : layers_) {
        views.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
        views.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
    return views;
}

bool DenseNet::operator==(const DenseNet& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& a = layers_[k];
        const auto& b = other.layers_[k];
        if (a.activation != b.activation || a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
            a.weight != b.weight || a.bias != b.bias) {
            return false;
        }
    }
    return true;
}

Gradients Gradients::zeros_like(const DenseNet& net) {
    Gradients g;
    for (const auto& layer : net.layers()) {
        g.weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
        g.bias.push_back(Vector::Zero(layer.bias.size()));
    }
    return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    if (weight.size() != other.weight.size()) throw ConfigurationError("gradient sets have different layer counts");
    for (std::size_t k = 0; k < weight.size(); ++k) {
        weight[k] += other.weight[k];
        bias[k] += other.bias[k];
    }
    return *this;
}

void Gradients::scale(double factor) {
    for (auto& w : weight) w *= factor;
    for (auto& b : bias) b *= factor;
}

void Gradients::set_zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
}

GradientViews Gradients::views() const {
    GradientViews views;
    views.reserve(2 * weight.size());
    for (std::size_t k = 0; k < weight.size(); ++k) {
        views.emplace_back(weight[k].data(), static_cast<std::size_t>(weight[k].size()));
        views.emplace_back(bias[k].data(), static_cast<std::size_t>(bias[k].size()));
    }
    return views;
}

ForwardCache forward(const DenseNet& net, const Matrix& batch) {
    if (net.layer_count() == 0) throw ConfigurationError("forward on an empty network");
    if (static_cast<std::size_t>(batch.cols()) != net.input_dim()) {
        throw ConfigurationError("input dim " + std::to_string(batch.cols()) + " != network input dim " +
                                 std::to_string(net.input_dim()));
    }
    ForwardCache cache;
    cache.inputs.reserve(net.layer_count());
    cache.outputs.reserve(net.layer_count());
    const Matrix* current = &batch;
    for (const auto& layer : net.layers()) {
        cache.inputs.push_back(*current);
        Matrix z = (*current) * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        apply_activation(z, layer.activation);
        cache.outputs.push_back(std::move(z));
        current = &cache.outputs.back();
    }
    return cache;
}

ForwardResult forward(const DenseNet& net, const Vector& input) {
    Matrix row = input.transpose();
    ForwardResult result{Vector(), forward(net, row)};
    result.output = result.cache.output().row(0).transpose();
    return result;
}

Matrix predict(const DenseNet& net, const Matrix& batch) {
    if (static_cast<std::size_t>(batch.cols()) != net.input_dim() || net.layer_count() == 0) {
        throw ConfigurationError("input dim " + std::to_string(batch.cols()) + " != network input dim " +
                                 std::to_string(net.input_dim()));
    }
    Matrix current = batch;
    for (const auto& layer : net.layers()) {
        Matrix z = current * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        apply_activation(z, layer.activation);
        current = std::move(z);
    }
    return current;
}

Vector predict(const DenseNet& net, const Vector& input) {
    if (static_cast<std::size_t>(input.size()) != net.input_dim() || net.layer_count() == 0) {
        throw ConfigurationError("input dim " + std::to_string(input.size()) + " != network input dim " +
                                 std::to_string(net.input_dim()));
    }
    Vector current = input;
    for (const auto& layer : net.layers()) {
        Matrix z = layer.weight * current + layer.bias;
        apply_activation(z, layer.activation);
        current = z;
    }
    return current;
}

BackwardResult backward(const DenseNet& net, const ForwardCache& cache, const Matrix& output_gradient) {
    const auto n = net.layer_count();
    if (cache.inputs.size() != n || cache.outputs.size() != n) {
        throw ConfigurationError("forward cache has " + std::to_string(cache.inputs.size()) +
                                 " layers, network has " + std::to_string(n));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const auto& layer = net.layer(k);
        if (static_cast<std::size_t>(cache.inputs[k].cols()) != layer.input_dim() ||
            static_cast<std::size_t>(cache.outputs[k].cols()) != layer.output_dim()) {
            throw ConfigurationError("forward cache does not match layer " + std::to_string(k));
        }
    }
    if (output_gradient.rows() != cache.output().rows() || output_gradient.cols() != cache.output().cols()) {
        throw ConfigurationError("output gradient shape does not match forward output");
    }

    BackwardResult result{Gradients::zeros_like(net), Matrix()};
    Matrix delta = output_gradient;
    for (std::size_t k = n; k-- > 0;) {
        const auto& layer = net.layer(k);
        apply_derivative(delta, cache.outputs[k], layer.activation);
        result.gradients.weight[k].noalias() = delta.transpose() * cache.inputs[k];
        result.gradients.bias[k] = delta.colwise().sum().transpose();
        Matrix upstream = delta * layer.weight;
        delta = std::move(upstream);
    }
    result.input_gradient = std::move(delta);
    return result;
}

std::uint64_t activation_pattern(const DenseNet& net, const ForwardCache& cache) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (std::size_t k = 0; k < net.layer_count() && k < cache.outputs.size(); ++k) {
        if (net.layer(k).activation != Activation::relu) continue;
        const auto& y = cache.outputs[k];
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            hash ^= (y.data()[i] > 0.0) ? 1U : 0U;
            hash *= 0x100000001B3ULL;
        }
    }
    return hash;
}

}  // namespace hashreward::nn
