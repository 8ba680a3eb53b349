#include "hashreward/reward/reward_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hashreward/errors.hpp"
#include "hashreward/nn/checkpoint.hpp"

namespace hashreward::reward {

namespace {

constexpr std::array<Variant, kVariantCount> kAllVariants{Variant::gail,       Variant::gail_ae,       Variant::gail_ae_up,
                                                          Variant::gail_uh,    Variant::gail_uh_up,    Variant::hashreward_ae,
                                                          Variant::hashreward};

constexpr std::uint32_t kRewardCheckpointVersion = 1;

struct PieceHash {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    void bit(bool b) {
        h ^= b ? 1U : 0U;
        h *= 0x100000001B3ULL;
    }
    void mix(std::uint64_t v) {
        h ^= v;
        h *= 0x100000001B3ULL;
    }
};

double sign_of(double x) { return x >= 0.0 ? 1.0 : -1.0; }

double clamp_probability(double d) { return std::clamp(d, kProbabilityFloor, kProbabilityCeiling); }

bool needs_codes(const VariantMask& mask) {
    return mask.head_input != HeadInput::pixels || mask.use_reconstruction || mask.use_binarization_reg ||
           mask.use_contrastive;
}

}  // namespace

VariantMask mask_for(Variant variant) {
    switch (variant) {
        case Variant::gail: return {false, false, false, false, HeadInput::pixels};
        case Variant::gail_ae: return {true, false, false, false, HeadInput::logits};
        case Variant::gail_ae_up: return {true, false, false, true, HeadInput::logits};
        case Variant::gail_uh: return {true, true, false, false, HeadInput::binarized};
        case Variant::gail_uh_up: return {true, true, false, true, HeadInput::binarized};
        case Variant::hashreward_ae: return {true, false, true, true, HeadInput::logits};
        case Variant::hashreward: return {true, true, true, true, HeadInput::binarized};
    }
    throw InputError("unknown variant");
}

std::string_view to_string(Variant variant) {
    switch (variant) {
        case Variant::gail: return "gail";
        case Variant::gail_ae: return "gail-ae";
        case Variant::gail_ae_up: return "gail-ae-up";
        case Variant::gail_uh: return "gail-uh";
        case Variant::gail_uh_up: return "gail-uh-up";
        case Variant::hashreward_ae: return "hashreward-ae";
        case Variant::hashreward: return "hashreward";
    }
    return "unknown";
}

Variant variant_from_string(std::string_view name) {
    for (auto v : kAllVariants) {
        if (to_string(v) == name) return v;
    }
    throw InputError("unknown variant '" + std::string(name) + "'");
}

std::span<const Variant> all_variants() { return kAllVariants; }

namespace {

struct Shapes {
    std::vector<std::size_t> encoder, decoder, head;
};

Shapes shapes_for(const RewardModelConfig& config, const VariantMask& mask) {
    if (config.code_length < 1 || config.code_length > 128) throw InputError("code length must lie in [1, 128]");
    if (config.lambda < 0.0) throw InputError("lambda must be >= 0");
    const auto features = mask.head_input == HeadInput::pixels ? config.pixel_count : config.code_length;
    return Shapes{{config.pixel_count, config.encoder_hidden, config.code_length},
                  {config.code_length, config.encoder_hidden, config.pixel_count},
                  {features + config.action_count, config.head_hidden, config.head_hidden, 1}};
}

constexpr std::array<nn::Activation, 2> kEncoderActs{nn::Activation::relu, nn::Activation::tanh};
constexpr std::array<nn::Activation, 2> kDecoderActs{nn::Activation::relu, nn::Activation::sigmoid};
constexpr std::array<nn::Activation, 3> kHeadActs{nn::Activation::relu, nn::Activation::relu, nn::Activation::sigmoid};

RewardModel assemble(const RewardModelConfig& config, Variant variant) {
    RewardModel model;
    model.code_length = config.code_length;
    model.action_count = config.action_count;
    model.lambda = config.lambda;
    model.variant = variant;
    model.mask = mask_for(variant);
    return model;
}

}  // namespace

RewardModel RewardModel::create(const RewardModelConfig& config, Variant variant, Rng& rng) {
    auto model = assemble(config, variant);
    const auto shapes = shapes_for(config, model.mask);
    model.encoder = nn::DenseNet::xavier(shapes.encoder, kEncoderActs, rng);
    model.decoder = nn::DenseNet::xavier(shapes.decoder, kDecoderActs, rng);
    model.head = nn::DenseNet::xavier(shapes.head, kHeadActs, rng);
    return model;
}

RewardModel RewardModel::zeros(const RewardModelConfig& config, Variant variant) {
    auto model = assemble(config, variant);
    const auto shapes = shapes_for(config, model.mask);
    model.encoder = nn::DenseNet::zeros(shapes.encoder, kEncoderActs);
    model.decoder = nn::DenseNet::zeros(shapes.decoder, kDecoderActs);
    model.head = nn::DenseNet::zeros(shapes.head, kHeadActs);
    return model;
}

nn::ParameterViews RewardModel::parameters() {
    auto views = encoder.parameters();
    for (auto v : decoder.parameters()) views.push_back(v);
    for (auto v : head.parameters()) views.push_back(v);
    return views;
}

nn::GradientViews LossResult::gradient_views() const {
    auto views = encoder_gradients.views();
    for (auto v : decoder_gradients.views()) views.push_back(v);
    for (auto v : head_gradients.views()) views.push_back(v);
    return views;
}

void SampleBatch::validate(std::size_t pixel_count, std::size_t action_count) const {
    if (static_cast<std::size_t>(states.rows()) != actions.size() || labels.size() != actions.size()) {
        throw InputError("sample batch columns have different lengths");
    }
    if (static_cast<std::size_t>(states.cols()) != pixel_count) {
        throw ConfigurationError("sample batch pixel count " + std::to_string(states.cols()) + " != model input " +
                                 std::to_string(pixel_count));
    }
    for (int a : actions) {
        if (a < 0 || static_cast<std::size_t>(a) >= action_count) throw InputError("invalid action in sample batch");
    }
    for (int y : labels) {
        if (y != 0 && y != 1) throw InputError("labels must be 0 or 1");
    }
}

Vector to_vector(const env::PixelState& state) {
    Vector v(static_cast<Eigen::Index>(state.intensities.size()));
    for (std::size_t i = 0; i < state.intensities.size(); ++i) v[static_cast<Eigen::Index>(i)] = state.intensities[i];
    return v;
}

Matrix to_matrix(std::span<const env::PixelState> states) {
    if (states.empty()) return Matrix(0, 0);
    const auto cols = states.front().intensities.size();
    Matrix m(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < states.size(); ++r) {
        if (states[r].intensities.size() != cols) throw InputError("states have different pixel counts");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = states[r].intensities[c];
    }
    return m;
}

SampleBatch make_batch(std::span<const LabeledState> samples) {
    SampleBatch batch;
    std::vector<env::PixelState> states;
    for (const auto& s : samples) {
        states.push_back(s.state);
        batch.actions.push_back(s.action);
        batch.labels.push_back(s.label);
    }
    batch.states = to_matrix(states);
    return batch;
}

Vector encode(const RewardModel& model, const env::PixelState& state) {
    return nn::predict(model.encoder, to_vector(state));
}

Matrix encode(const RewardModel& model, const Matrix& states) { return nn::predict(model.encoder, states); }

Vector binarize(const Vector& code_logits) { return code_logits.unaryExpr([](double x) { return sign_of(x); }); }

Matrix binarize(const Matrix& code_logits) { return code_logits.unaryExpr([](double x) { return sign_of(x); }); }

Matrix binarize_backward(const Matrix& code_logits, const Matrix& upstream) {
    return (code_logits.array().abs() <= 1.0).select(upstream, 0.0);
}

Vector reconstruct(const RewardModel& model, const Vector& code_logits) {
    if (static_cast<std::size_t>(code_logits.size()) != model.code_length) {
        throw ConfigurationError("code length mismatch in reconstruct");
    }
    return nn::predict(model.decoder, code_logits);
}

Matrix head_features(const RewardModel& model, const Matrix& states, const Matrix& code_logits,
                     std::span<const int> actions, bool relaxed_binarization) {
    const auto n = static_cast<Eigen::Index>(actions.size());
    const auto features = static_cast<Eigen::Index>(model.head_feature_dim());
    Matrix x = Matrix::Zero(n, features + static_cast<Eigen::Index>(model.action_count));
    switch (model.mask.head_input) {
        case HeadInput::pixels: x.leftCols(features) = states; break;
        case HeadInput::logits: x.leftCols(features) = code_logits; break;
        case HeadInput::binarized:
            x.leftCols(features) = relaxed_binarization ? code_logits : binarize(code_logits);
            break;
    }
    for (Eigen::Index r = 0; r < n; ++r) x(r, features + actions[static_cast<std::size_t>(r)]) = 1.0;
    return x;
}

Matrix mapped_features(const RewardModel& model, const Matrix& states) {
    if (static_cast<std::size_t>(states.cols()) != model.pixel_count()) {
        throw ConfigurationError("state pixel count does not match the reward model");
    }
    switch (model.mask.head_input) {
        case HeadInput::pixels: return states;
        case HeadInput::logits: return nn::predict(model.encoder, states);
        case HeadInput::binarized: return binarize(nn::predict(model.encoder, states));
    }
    return states;
}

std::vector<double> discriminate(const RewardModel& model, const Matrix& states, std::span<const int> actions) {
    if (static_cast<std::size_t>(states.rows()) != actions.size()) throw InputError("states/actions length mismatch");
    if (static_cast<std::size_t>(states.cols()) != model.pixel_count()) {
        throw ConfigurationError("state pixel count does not match the reward model");
    }
    for (int a : actions) {
        if (a < 0 || static_cast<std::size_t>(a) >= model.action_count) throw InputError("invalid action index");
    }
    Matrix codes;
    if (model.mask.head_input != HeadInput::pixels) codes = nn::predict(model.encoder, states);
    const auto out = nn::predict(model.head, head_features(model, states, codes, actions));
    std::vector<double> d(actions.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = clamp_probability(out(static_cast<Eigen::Index>(i), 0));
    return d;
}

double discriminate(const RewardModel& model, const env::PixelState& state, int action) {
    const Matrix row = to_vector(state).transpose();
    const std::array<int, 1> actions{action};
    return discriminate(model, row, actions).front();
}

HashingTerms hashing_loss_terms(const VariantMask& mask, double lambda, const PairParts& first, const PairParts& second) {
    HashingTerms terms;
    if (mask.use_reconstruction) {
        terms.reconstruction = (first.state - first.reconstruction).squaredNorm() +
                               (second.state - second.reconstruction).squaredNorm();
    }
    if (mask.use_binarization_reg) {
        terms.binarization = lambda * ((1.0 - first.code.array().abs()).square().sum() +
                                       (1.0 - second.code.array().abs()).square().sum());
    }
    if (mask.use_contrastive) {
        const double distance = (first.code - second.code).squaredNorm();
        const double margin = 2.0 * static_cast<double>(first.code.size());
        terms.contrastive = first.label == second.label ? 0.5 * distance : 0.5 * std::max(margin - distance, 0.0);
    }
    return terms;
}

double hashing_loss(const RewardModel& model, const std::pair<LabeledState, LabeledState>& pair) {
    const auto parts = [&](const LabeledState& s) {
        PairParts p;
        p.state = to_vector(s.state);
        if (static_cast<std::size_t>(p.state.size()) != model.pixel_count()) {
            throw ConfigurationError("state pixel count does not match the reward model");
        }
        p.code = nn::predict(model.encoder, p.state);
        p.reconstruction = nn::predict(model.decoder, p.code);
        p.label = s.label;
        return p;
    };
    return hashing_loss_terms(model.mask, model.lambda, parts(pair.first), parts(pair.second)).total();
}

double discriminator_loss_from_probabilities(std::span<const double> expert_d, std::span<const double> learner_d) {
    if (expert_d.empty() || learner_d.empty()) throw InputError("discriminator loss needs non-empty expert and learner batches");
    double expert = 0.0;
    for (double d : expert_d) expert -= std::log(clamp_probability(d));
    double learner = 0.0;
    for (double d : learner_d) learner -= std::log(1.0 - clamp_probability(d));
    return expert / static_cast<double>(expert_d.size()) + learner / static_cast<double>(learner_d.size());
}

double discriminator_loss(const RewardModel& model, const SampleBatch& expert_batch, const SampleBatch& learner_batch) {
    if (expert_batch.size() == 0 || learner_batch.size() == 0) {
        throw InputError("discriminator loss needs non-empty expert and learner batches");
    }
    const auto de = discriminate(model, expert_batch.states, expert_batch.actions);
    const auto dl = discriminate(model, learner_batch.states, learner_batch.actions);
    return discriminator_loss_from_probabilities(de, dl);
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::span<const int> labels, Rng& rng) {
    const std::size_t n = labels.size();
    if (n < 2) throw InputError("pairing needs at least two samples");
    const std::size_t pair_count = n / 2;
    const std::size_t quota = (pair_count + 3) / 4;
    std::vector<std::size_t> order(n);
    std::vector<std::pair<std::size_t, std::size_t>> pairs(pair_count);
    for (int attempt = 0; attempt < 64; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        shuffle(order.begin(), order.end(), rng);
        std::size_t same = 0;
        for (std::size_t p = 0; p < pair_count; ++p) {
            pairs[p] = {order[2 * p], order[2 * p + 1]};
            if (labels[pairs[p].first] == labels[pairs[p].second]) ++same;
        }
        if (same >= quota && pair_count - same >= quota) break;
    }
    return pairs;
}

LossResult total_loss(const RewardModel& model, const SampleBatch& batch,
                      std::span<const std::pair<std::size_t, std::size_t>> pairs, const LossOptions& options) {
    batch.validate(model.pixel_count(), model.action_count);
    const auto n = batch.size();
    std::size_t expert_count = 0;
    for (int y : batch.labels) expert_count += static_cast<std::size_t>(y);
    const std::size_t learner_count = n - expert_count;
    if (expert_count == 0 || learner_count == 0) {
        throw InputError("total loss needs both expert and learner samples in the batch");
    }
    if (pairs.empty()) throw InputError("total loss needs at least one pair");

    const auto& mask = model.mask;
    const auto l = static_cast<Eigen::Index>(model.code_length);
    LossResult result;
    result.encoder_gradients = nn::Gradients::zeros_like(model.encoder);
    result.decoder_gradients = nn::Gradients::zeros_like(model.decoder);
    PieceHash piece;

    nn::ForwardCache encoder_cache;
    Matrix codes;
    if (needs_codes(mask)) {
        encoder_cache = nn::forward(model.encoder, batch.states);
        codes = encoder_cache.output();
        piece.mix(nn::activation_pattern(model.encoder, encoder_cache));
        for (Eigen::Index i = 0; i < codes.size(); ++i) piece.bit(codes.data()[i] >= 0.0);
    }
    Matrix code_grad = Matrix::Zero(static_cast<Eigen::Index>(n), l);
    const bool train_autoencoder = mask.update_autoencoder_during_training && needs_codes(mask);

    // Hashing loss, averaged over pairs.
    const double pair_weight = 1.0 / static_cast<double>(pairs.size());
    nn::ForwardCache decoder_cache;
    Matrix recon_grad;
    if (mask.use_reconstruction) {
        decoder_cache = nn::forward(model.decoder, codes);
        piece.mix(nn::activation_pattern(model.decoder, decoder_cache));
        recon_grad = Matrix::Zero(static_cast<Eigen::Index>(n), batch.states.cols());
    }
    const double margin = 2.0 * static_cast<double>(model.code_length);
    double hashing = 0.0;
    for (const auto& [i, j] : pairs) {
        if (i >= n || j >= n || i == j) throw InputError("invalid pair index");
        const auto ri = static_cast<Eigen::Index>(i);
        const auto rj = static_cast<Eigen::Index>(j);
        if (mask.use_reconstruction) {
            for (const auto r : {ri, rj}) {
                const auto residual = (batch.states.row(r) - decoder_cache.output().row(r)).eval();
                hashing += residual.squaredNorm();
                recon_grad.row(r) += -2.0 * pair_weight * residual;
            }
        }
        if (mask.use_binarization_reg) {
            for (const auto r : {ri, rj}) {
                const auto gap = (1.0 - codes.row(r).array().abs()).eval();
                hashing += model.lambda * gap.square().sum();
                const auto signs = codes.row(r).unaryExpr([](double x) { return sign_of(x); }).array();
                code_grad.row(r).array() += pair_weight * (-2.0 * model.lambda) * gap * signs;
            }
        }
        if (mask.use_contrastive) {
            const auto diff = (codes.row(ri) - codes.row(rj)).eval();
            const double distance = diff.squaredNorm();
            if (batch.labels[i] == batch.labels[j]) {
                hashing += 0.5 * distance;
                code_grad.row(ri) += pair_weight * diff;
                code_grad.row(rj) -= pair_weight * diff;
            } else {
                const bool active = distance < margin;
                piece.bit(active);
                if (active) {
                    hashing += 0.5 * (margin - distance);
                    code_grad.row(ri) -= pair_weight * diff;
                    code_grad.row(rj) += pair_weight * diff;
                }
            }
        }
    }
    result.hashing = hashing * pair_weight;
    if (mask.use_reconstruction && train_autoencoder) {
        auto back = nn::backward(model.decoder, decoder_cache, recon_grad);
        result.decoder_gradients = std::move(back.gradients);
        code_grad += back.input_gradient;
    }

    // Discriminator loss.
    const Matrix features = head_features(model, batch.states, codes, batch.actions, options.relaxed_binarization);
    const auto head_cache = nn::forward(model.head, features);
    piece.mix(nn::activation_pattern(model.head, head_cache));
    Matrix d_grad = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
    double expert_term = 0.0;
    double learner_term = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        const double d = head_cache.output()(row, 0);
        const bool clamped = d < kProbabilityFloor || d > kProbabilityCeiling;
        piece.bit(clamped);
        const double dc = clamp_probability(d);
        if (batch.labels[r] == 1) {
            expert_term -= std::log(dc);
            result.mean_d_expert += dc;
            if (!clamped) d_grad(row, 0) = -1.0 / (static_cast<double>(expert_count) * d);
        } else {
            learner_term -= std::log(1.0 - dc);
            result.mean_d_learner += dc;
            if (!clamped) d_grad(row, 0) = 1.0 / (static_cast<double>(learner_count) * (1.0 - d));
        }
    }
    result.discriminator = expert_term / static_cast<double>(expert_count) + learner_term / static_cast<double>(learner_count);
    result.mean_d_expert /= static_cast<double>(expert_count);
    result.mean_d_learner /= static_cast<double>(learner_count);
    auto head_back = nn::backward(model.head, head_cache, d_grad);
    result.head_gradients = std::move(head_back.gradients);

    if (train_autoencoder) {
        if (mask.head_input != HeadInput::pixels) {
            const Matrix upstream = head_back.input_gradient.leftCols(l);
            if (mask.head_input == HeadInput::binarized && !options.relaxed_binarization) {
                code_grad += binarize_backward(codes, upstream);
            } else {
                code_grad += upstream;
            }
        }
        result.encoder_gradients = nn::backward(model.encoder, encoder_cache, code_grad).gradients;
    } else {
        result.decoder_gradients.set_zero();
    }

    result.total = result.hashing + result.discriminator;
    result.piece = piece.h;
    return result;
}

LossResult total_loss(const RewardModel& model, const SampleBatch& batch, Rng& rng) {
    std::size_t experts = 0;
    for (int y : batch.labels) experts += static_cast<std::size_t>(y == 1);
    if (experts == 0 || experts == batch.labels.size()) {
        throw InputError("total loss needs both expert and learner samples in the batch");
    }
    const auto pairs = sample_pairs(batch.labels, rng);
    return total_loss(model, batch, pairs);
}

AutoencoderLoss autoencoder_loss(const RewardModel& model, const Matrix& states) {
    if (states.rows() == 0) throw InputError("autoencoder loss on an empty batch");
    const auto n = static_cast<double>(states.rows());
    AutoencoderLoss result;
    PieceHash piece;
    const auto encoder_cache = nn::forward(model.encoder, states);
    const Matrix& codes = encoder_cache.output();
    const auto decoder_cache = nn::forward(model.decoder, codes);
    piece.mix(nn::activation_pattern(model.encoder, encoder_cache));
    piece.mix(nn::activation_pattern(model.decoder, decoder_cache));

    const Matrix residual = states - decoder_cache.output();
    result.loss = residual.squaredNorm() / n;
    Matrix code_grad = Matrix::Zero(codes.rows(), codes.cols());
    if (model.mask.use_binarization_reg) {
        const auto gap = (1.0 - codes.array().abs()).eval();
        result.loss += model.lambda * gap.square().sum() / n;
        const auto signs = codes.unaryExpr([](double x) { return sign_of(x); }).array();
        code_grad.array() += (-2.0 * model.lambda / n) * gap * signs;
        for (Eigen::Index i = 0; i < codes.size(); ++i) piece.bit(codes.data()[i] >= 0.0);
    }
    auto back = nn::backward(model.decoder, decoder_cache, (-2.0 / n) * residual);
    result.decoder_gradients = std::move(back.gradients);
    code_grad += back.input_gradient;
    result.encoder_gradients = nn::backward(model.encoder, encoder_cache, code_grad).gradients;
    result.piece = piece.h;
    return result;
}

double reconstruction_mse(const RewardModel& model, const Matrix& states) {
    if (states.size() == 0) throw InputError("reconstruction error on an empty batch");
    const Matrix recon = nn::predict(model.decoder, nn::predict(model.encoder, states));
    return (states - recon).squaredNorm() / static_cast<double>(states.size());
}

double pseudo_reward_from_probability(double d) {
    return -std::log(1.0 - clamp_probability(d)) / -std::log(kProbabilityFloor);
}

double pseudo_reward(const RewardModel& model, const env::PixelState& state, int action) {
    return pseudo_reward_from_probability(discriminate(model, state, action));
}

std::vector<double> pseudo_rewards(const RewardModel& model, const Matrix& states, std::span<const int> actions) {
    auto d = discriminate(model, states, actions);
    for (auto& v : d) v = pseudo_reward_from_probability(v);
    return d;
}

RewardTrainer::RewardTrainer(RewardModel& model, double learning_rate, std::uint64_t total_updates)
    : state_(nn::AdamState::for_parameters(model.parameters())),
      learning_rate_(learning_rate),
      total_updates_(total_updates) {}

LossResult RewardTrainer::update(RewardModel& model, const SampleBatch& batch, Rng& rng) {
    auto loss = total_loss(model, batch, rng);
    if (!std::isfinite(loss.total)) throw NumericError("reward model loss is not finite");
    nn::adam_step(model.parameters(), loss.gradient_views(), state_,
                  nn::linear_decay(learning_rate_, state_.step_count, total_updates_));
    return loss;
}

double hamming_distance(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw InputError("hash codes differ in length");
    double count = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) count += a[i] != b[i] ? 1.0 : 0.0;
    return count;
}

CodeExport export_codes(const RewardModel& model, std::span<const CodeGroup> groups) {
    CodeExport out;
    for (const auto& g : groups) {
        out.group_names.push_back(g.name);
        out.codes.push_back(g.states.rows() == 0 ? Matrix(0, static_cast<Eigen::Index>(model.code_length))
                                                 : binarize(encode(model, g.states)));
    }
    const auto k = groups.size();
    out.mean_hamming.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            const auto& ca = out.codes[a];
            const auto& cb = out.codes[b];
            double total = 0.0;
            double count = 0.0;
            for (Eigen::Index i = 0; i < ca.rows(); ++i) {
                for (Eigen::Index j = (a == b ? i + 1 : 0); j < cb.rows(); ++j) {
                    total += (ca.row(i).array() != cb.row(j).array()).count();
                    count += 1.0;
                }
            }
            out.mean_hamming[a][b] = out.mean_hamming[b][a] = count > 0.0 ? total / count : 0.0;
        }
    }
    return out;
}

void write_code_export(const std::filesystem::path& directory, const CodeExport& codes) {
    std::filesystem::create_directories(directory);
    std::ofstream matrix(directory / "codes.txt");
    std::ofstream labels(directory / "labels.txt");
    if (!matrix || !labels) throw FormatError("cannot write code export to " + directory.string());
    for (std::size_t g = 0; g < codes.codes.size(); ++g) {
        const auto& c = codes.codes[g];
        for (Eigen::Index r = 0; r < c.rows(); ++r) {
            for (Eigen::Index k = 0; k < c.cols(); ++k) matrix << (k ? " " : "") << (c(r, k) > 0 ? "1" : "-1");
            matrix << '\n';
            labels << codes.group_names[g] << '\n';
        }
    }
    nlohmann::json summary;
    summary["groups"] = codes.group_names;
    summary["mean_hamming"] = codes.mean_hamming;
    std::vector<std::size_t> counts;
    for (const auto& c : codes.codes) counts.push_back(static_cast<std::size_t>(c.rows()));
    summary["counts"] = counts;
    std::ofstream(directory / "hamming.json") << summary.dump(2) << '\n';
}

void save_reward_model(const std::filesystem::path& path, const RewardModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    nn::io::write_magic(out, "HRRM");
    nn::io::write_u32(out, kRewardCheckpointVersion);
    nn::io::write_u32(out, static_cast<std::uint32_t>(model.code_length));
    const auto bits = std::bit_cast<std::uint64_t>(model.lambda);
    nn::io::write_u32(out, static_cast<std::uint32_t>(bits & 0xFFFFFFFFULL));
    nn::io::write_u32(out, static_cast<std::uint32_t>(bits >> 32));
    nn::io::write_u8(out, static_cast<std::uint8_t>(model.variant));
    nn::write_net(out, model.encoder);
    nn::write_net(out, model.decoder);
    nn::write_net(out, model.head);
}

RewardModel load_reward_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open reward model checkpoint " + path.string());
    nn::io::expect_magic(in, "HRRM");
    if (nn::io::read_u32(in) != kRewardCheckpointVersion) throw FormatError("unsupported reward model checkpoint version");
    RewardModel model;
    model.code_length = nn::io::read_u32(in);
    const std::uint64_t lo = nn::io::read_u32(in);
    const std::uint64_t hi = nn::io::read_u32(in);
    model.lambda = std::bit_cast<double>(lo | (hi << 32));
    const auto tag = nn::io::read_u8(in);
    if (tag >= kVariantCount) throw FormatError("unknown variant tag in reward model checkpoint");
    model.variant = static_cast<Variant>(tag);
    model.mask = mask_for(model.variant);
    model.encoder = nn::read_net(in);
    model.decoder = nn::read_net(in);
    model.head = nn::read_net(in);
    if (model.encoder.output_dim() != model.code_length || model.decoder.input_dim() != model.code_length) {
        throw FormatError("reward model checkpoint code length does not match its networks");
    }
    const auto features = model.mask.head_input == HeadInput::pixels ? model.encoder.input_dim() : model.code_length;
    if (model.head.input_dim() <= features) throw FormatError("reward model head is narrower than its feature input");
    model.action_count = model.head.input_dim() - features;
    return model;
}

}  // namespace hashreward::reward
