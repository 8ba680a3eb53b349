#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hashreward/env/gridworld.hpp"
#include "hashreward/nn/adam.hpp"
#include "hashreward/nn/dense_net.hpp"

namespace hashreward::policy {

using nn::Matrix;
using nn::Vector;

struct PolicyConfig {
    std::size_t pixel_count = 1024;
    std::size_t hidden = 64;
    std::size_t action_count = env::kActionCount;
};

// Shared tanh trunk feeding a softmax policy head and a scalar value head.
struct PolicyNetwork {
    nn::DenseNet trunk;
    nn::DenseNet policy_head;
    nn::DenseNet value_head;

    static PolicyNetwork create(const PolicyConfig& config, Rng& rng);
    static PolicyNetwork zeros(const PolicyConfig& config);

    std::size_t action_count() const { return policy_head.output_dim(); }
    std::size_t pixel_count() const { return trunk.input_dim(); }
    nn::ParameterViews parameters();
    bool operator==(const PolicyNetwork&) const = default;
};

struct PolicyEvaluation {
    Matrix log_probs;      // N x |A|
    Matrix probabilities;  // N x |A|
    Vector values;
};

PolicyEvaluation evaluate_states(const PolicyNetwork& policy, const Matrix& states);

struct ActResult {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
};

// Samples from the softmax, or takes the argmax (lowest index on ties) when greedy.
ActResult act(const PolicyNetwork& policy, const env::PixelState& state, Rng& rng, bool greedy = false);

// Wraps the network as an environment policy; `policy` must outlive the returned function.
env::PolicyFn as_policy_fn(const PolicyNetwork& policy, bool greedy);

// Time-ordered transitions, possibly spanning several episodes. dones[t] marks the last
// step of an episode; bootstrap_value is V(s_{T}) when the final episode is cut off.
struct RolloutBatch {
    Matrix states;
    std::vector<int> actions;
    std::vector<double> rewards;       // what the learner optimizes (pseudo or true)
    std::vector<double> true_rewards;  // evaluation only
    std::vector<double> values;
    std::vector<double> log_probs;
    std::vector<std::uint8_t> dones;
    std::vector<std::uint8_t> reached_goal;    // episode ended by entering the goal
    std::vector<double> truncation_values;     // V(next observation) where the horizon cut the episode, else 0
    std::vector<double> terminal_values;       // value bootstrapped after a done step; empty means 0
    std::optional<double> bootstrap_value;
    std::vector<double> advantages;
    std::vector<double> returns;
    std::vector<double> episode_returns;  // true returns of episodes completed in this batch

    std::size_t size() const { return actions.size(); }
};

struct Advantages {
    std::vector<double> advantages;
    std::vector<double> returns;
};

// GAE(gamma, lambda) with returns = advantages + values.
Advantages compute_advantages(const RolloutBatch& batch, double gamma, double gae_lambda);

// Zero mean, unit (population) variance.
void normalize_advantages(std::vector<double>& advantages);

struct PpoConfig {
    double clip_epsilon = 0.2;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    int epochs = 4;
    std::size_t minibatch_size = 64;
    double learning_rate = 3e-4;
    double gamma = 0.99;
    double gae_lambda = 0.95;
};

struct PpoLoss {
    double total = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    nn::Gradients trunk_gradients;
    nn::Gradients policy_gradients;
    nn::Gradients value_gradients;
    std::uint64_t piece = 0;

    nn::GradientViews gradient_views() const;
};

// Clipped surrogate + value regression - entropy bonus on a minibatch (advantages as given).
PpoLoss ppo_loss(const PolicyNetwork& policy, const Matrix& states, std::span<const int> actions,
                 std::span<const double> old_log_probs, std::span<const double> advantages,
                 std::span<const double> returns, const PpoConfig& config);

struct PpoDiagnostics {
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    double entropy = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
};

// Adam over the policy with a learning rate decayed linearly per ppo_update call.
class PpoTrainer {
public:
    PpoTrainer(PolicyNetwork& policy, const PpoConfig& config, std::uint64_t total_updates);

    // Normalizes a copy of the batch advantages and runs the configured epochs of minibatch steps.
    PpoDiagnostics ppo_update(PolicyNetwork& policy, const RolloutBatch& batch, Rng& rng);

    const PpoConfig& config() const { return config_; }
    std::uint64_t updates() const { return updates_; }

private:
    PpoConfig config_;
    nn::AdamState adam_;
    std::uint64_t total_updates_;
    std::uint64_t updates_ = 0;
};

// Steps one environment continuously across episode boundaries.
class EnvRunner {
public:
    EnvRunner(env::GridworldSpec spec, std::uint64_t seed);

    RolloutBatch collect(const PolicyNetwork& policy, std::size_t steps);
    const env::GridworldSpec& spec() const { return spec_; }

private:
    env::GridworldSpec spec_;
    Rng env_rng_;
    Rng policy_rng_;
    env::GridState state_;
    env::PixelState observation_;
    double episode_return_ = 0.0;
};

// Assigns the learner's rewards to a collected batch.
using RewardLabeler = std::function<std::vector<double>(const RolloutBatch&)>;

RewardLabeler true_reward_labeler();

struct PolicyStep {
    RolloutBatch batch;
    PpoDiagnostics diagnostics;
};

// Collect -> label -> advantages -> ppo_update.
PolicyStep train_policy_step(PolicyNetwork& policy, PpoTrainer& trainer, EnvRunner& runner,
                             const RewardLabeler& labeler, std::size_t steps_per_iter, Rng& rng);

// Trunk, policy head and value head written back to back as HRNN blocks.
void save_policy(const std::filesystem::path& path, const PolicyNetwork& policy);
PolicyNetwork load_policy(const std::filesystem::path& path);

}  // namespace hashreward::policy
