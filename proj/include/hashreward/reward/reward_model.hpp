#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hashreward/env/gridworld.hpp"
#include "hashreward/nn/adam.hpp"
#include "hashreward/nn/dense_net.hpp"

namespace hashreward::reward {

using nn::Matrix;
using nn::Vector;

// What the discriminator head sees in front of the one-hot action.
enum class HeadInput : std::uint8_t { pixels = 0, logits = 1, binarized = 2 };

struct VariantMask {
    bool use_reconstruction = false;
    bool use_binarization_reg = false;
    bool use_contrastive = false;
    bool update_autoencoder_during_training = false;
    HeadInput head_input = HeadInput::pixels;

    bool operator==(const VariantMask&) const = default;
};

enum class Variant : std::uint8_t { gail = 0, gail_ae, gail_ae_up, gail_uh, gail_uh_up, hashreward_ae, hashreward };

inline constexpr std::size_t kVariantCount = 7;

VariantMask mask_for(Variant variant);
std::string_view to_string(Variant variant);
Variant variant_from_string(std::string_view name);
std::span<const Variant> all_variants();

struct RewardModelConfig {
    std::size_t pixel_count = 1024;
    std::size_t action_count = env::kActionCount;
    std::size_t code_length = 32;
    double lambda = 0.01;
    std::size_t encoder_hidden = 256;
    std::size_t head_hidden = 64;
};

// Lower and upper clamp applied to D before any logarithm.
inline constexpr double kProbabilityFloor = 1e-6;
inline constexpr double kProbabilityCeiling = 1.0 - 1e-6;

// Autoencoder (encoder pixels -> l tanh logits, decoder l -> pixels sigmoid) plus a
// discriminator head over concat(code-or-pixels, one-hot action) ending in a sigmoid.
struct RewardModel {
    nn::DenseNet encoder;
    nn::DenseNet decoder;
    nn::DenseNet head;
    std::size_t code_length = 0;
    std::size_t action_count = env::kActionCount;
    double lambda = 0.01;
    Variant variant = Variant::hashreward;
    VariantMask mask;

    static RewardModel create(const RewardModelConfig& config, Variant variant, Rng& rng);
    // All-zero weights; used for closed-form checks.
    static RewardModel zeros(const RewardModelConfig& config, Variant variant);

    std::size_t pixel_count() const { return encoder.input_dim(); }
    std::size_t head_feature_dim() const { return head.input_dim() - action_count; }

    // Encoder, decoder, head parameter views concatenated in that order.
    nn::ParameterViews parameters();
};

// Batch of (state, action, label) rows; label 1 = expert demonstration, 0 = learner.
struct SampleBatch {
    Matrix states;
    std::vector<int> actions;
    std::vector<int> labels;

    std::size_t size() const { return actions.size(); }
    void validate(std::size_t pixel_count, std::size_t action_count) const;
};

struct LabeledState {
    env::PixelState state;
    int action = 0;
    int label = 0;
};

Vector to_vector(const env::PixelState& state);
Matrix to_matrix(std::span<const env::PixelState> states);
SampleBatch make_batch(std::span<const LabeledState> samples);

Vector encode(const RewardModel& model, const env::PixelState& state);
Matrix encode(const RewardModel& model, const Matrix& states);

// Elementwise sign with sign(0) = +1.
Vector binarize(const Vector& code_logits);
Matrix binarize(const Matrix& code_logits);

// Straight-through backward of binarize: passes the upstream gradient where |logit| <= 1.
Matrix binarize_backward(const Matrix& code_logits, const Matrix& upstream);

Vector reconstruct(const RewardModel& model, const Vector& code_logits);

// Clamped sigmoid output of the head.
double discriminate(const RewardModel& model, const env::PixelState& state, int action);
std::vector<double> discriminate(const RewardModel& model, const Matrix& states, std::span<const int> actions);

// The head's input rows for a batch: features per mask then one-hot action.
Matrix head_features(const RewardModel& model, const Matrix& states, const Matrix& code_logits,
                     std::span<const int> actions, bool relaxed_binarization = false);

// The representation the head sees for each state (pixels, logits or +/-1 codes), without the action.
Matrix mapped_features(const RewardModel& model, const Matrix& states);

// Per-pair hashing loss from explicit parts (states, reconstructions, logit codes, labels).
struct PairParts {
    Vector state;
    Vector reconstruction;
    Vector code;
    int label = 0;
};

struct HashingTerms {
    double reconstruction = 0.0;
    double binarization = 0.0;
    double contrastive = 0.0;
    double total() const { return reconstruction + binarization + contrastive; }
};

HashingTerms hashing_loss_terms(const VariantMask& mask, double lambda, const PairParts& first, const PairParts& second);
double hashing_loss(const RewardModel& model, const std::pair<LabeledState, LabeledState>& pair);

// -mean_expert log D - mean_learner log(1 - D), with D clamped.
double discriminator_loss_from_probabilities(std::span<const double> expert_d, std::span<const double> learner_d);
double discriminator_loss(const RewardModel& model, const SampleBatch& expert_batch, const SampleBatch& learner_batch);

// Random partition of the batch into pairs with at least a quarter same-label and a quarter
// different-label pairs (rejection sampled; the last draw is kept when the quota is infeasible).
std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::span<const int> labels, Rng& rng);

struct LossOptions {
    // Use identity instead of sign in the forward pass. The straight-through backward is the
    // exact derivative of this relaxation, which is what finite differences can check.
    bool relaxed_binarization = false;
};

struct LossResult {
    double total = 0.0;
    double hashing = 0.0;
    double discriminator = 0.0;
    double mean_d_expert = 0.0;
    double mean_d_learner = 0.0;
    nn::Gradients encoder_gradients;
    nn::Gradients decoder_gradients;
    nn::Gradients head_gradients;
    std::uint64_t piece = 0;  // smooth-piece id, see nn::ProbeEvaluation

    nn::GradientViews gradient_views() const;
};

// L = mean over pairs of L_H + L_D, with gradients for every parameter. Autoencoder
// gradients are zero when the mask freezes the autoencoder.
LossResult total_loss(const RewardModel& model, const SampleBatch& batch,
                      std::span<const std::pair<std::size_t, std::size_t>> pairs, const LossOptions& options = {});
LossResult total_loss(const RewardModel& model, const SampleBatch& batch, Rng& rng);

// Unsupervised autoencoder loss per state, averaged: ||s - s'||^2 (+ lambda ||1 - |b|||^2 if masked in).
struct AutoencoderLoss {
    double loss = 0.0;
    nn::Gradients encoder_gradients;
    nn::Gradients decoder_gradients;
    std::uint64_t piece = 0;
};
AutoencoderLoss autoencoder_loss(const RewardModel& model, const Matrix& states);

// Mean squared reconstruction error per pixel.
double reconstruction_mse(const RewardModel& model, const Matrix& states);

// -log(1 - D) / -log(floor), D clamped; lies in [0, 1] and is nondecreasing in D.
double pseudo_reward_from_probability(double d);
double pseudo_reward(const RewardModel& model, const env::PixelState& state, int action);
std::vector<double> pseudo_rewards(const RewardModel& model, const Matrix& states, std::span<const int> actions);

// Adam with linear learning-rate decay over `total_updates`.
class RewardTrainer {
public:
    RewardTrainer(RewardModel& model, double learning_rate, std::uint64_t total_updates);

    LossResult update(RewardModel& model, const SampleBatch& batch, Rng& rng);
    std::uint64_t updates() const { return state_.step_count; }

private:
    nn::AdamState state_;
    double learning_rate_;
    std::uint64_t total_updates_;
};

struct CodeGroup {
    std::string name;
    Matrix states;
};

struct CodeExport {
    std::vector<std::string> group_names;
    std::vector<Matrix> codes;             // one +/-1 row per sample
    std::vector<std::vector<double>> mean_hamming;  // [a][b]; diagonal = within-group mean over distinct pairs
};

double hamming_distance(const Vector& a, const Vector& b);
CodeExport export_codes(const RewardModel& model, std::span<const CodeGroup> groups);

// codes.txt (+/-1 rows), labels.txt (group per row) and hamming.json in `directory`.
void write_code_export(const std::filesystem::path& directory, const CodeExport& codes);

// "HRRM" | u32 version | u32 code length | f64 lambda | u8 variant tag | encoder, decoder, head as HRNN blocks.
void save_reward_model(const std::filesystem::path& path, const RewardModel& model);
RewardModel load_reward_model(const std::filesystem::path& path);

}  // namespace hashreward::reward
