#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hashreward/env/demonstrations.hpp"
#include "hashreward/env/gridworld.hpp"
#include "hashreward/policy/policy.hpp"
#include "hashreward/reward/reward_model.hpp"
#include "hashreward/util/key_value.hpp"

namespace hashreward::harness {

struct ExperimentConfig {
    env::GridworldSpec env = env::GridworldSpec::standard();
    reward::Variant variant = reward::Variant::hashreward;
    std::size_t demo_count = 20;
    std::size_t code_length = 32;
    double lambda = 0.01;
    std::size_t encoder_hidden = 256;
    std::size_t head_hidden = 64;
    std::size_t policy_hidden = 64;
    double reward_learning_rate = 3e-4;
    std::size_t pretrain_updates = 20000;
    std::size_t pretrain_batch = 256;
    std::size_t total_env_steps = 300000;
    std::size_t learner_ratio = 3;             // PPO phases per reward-model phase
    std::size_t reward_updates_per_phase = 1;  // minibatch updates per reward-model phase
    // Goal entry leads to an absorbing state the discriminator also scores; its pseudo-reward
    // is bootstrapped as r/(1-gamma). Horizon cut-offs bootstrap from the critic.
    bool absorbing_terminal = true;
    std::size_t reward_batch_learner = 128;
    std::size_t reward_batch_expert = 128;
    std::size_t steps_per_iter = 2048;
    policy::PpoConfig ppo;
    std::size_t eval_interval = 10;
    std::size_t eval_episodes = 20;
    std::size_t checkpoint_interval = 10;
    std::size_t code_samples = 100;
    std::uint64_t code_rollout_seed = 777;
    std::uint64_t eval_seed = 424242;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output_dir = "runs";
    std::filesystem::path expert_demos;
    std::filesystem::path random_demos;  // generated with the uniform policy when empty
    std::uint64_t random_demo_seed = 50000;
    bool record_wall_clock = false;

    void validate() const;
    std::size_t iterations() const;
};

// Applies recognised keys on top of `base`; unknown keys are an InputError.
ExperimentConfig config_from(const KeyValues& values, ExperimentConfig base = {});
KeyValues to_key_values(const ExperimentConfig& config);

inline constexpr const char* kMetricsHeader =
    "env_step,true_return,pr_agent,pr_expert,loss_h,loss_d,d_expert,d_agent,entropy,seconds";

struct MetricsRow {
    std::size_t env_step = 0;
    double true_return = 0.0;
    double pr_agent = 0.0;
    double pr_expert = 0.0;
    double loss_h = 0.0;
    double loss_d = 0.0;
    double d_expert = 0.0;
    double d_agent = 0.0;
    double entropy = 0.0;
    double seconds = 0.0;
};

std::string format_metrics_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct EvalResult {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> returns;
};

// Mean and population std of true undiscounted return over `episodes` rollouts with seeds seed..seed+episodes-1.
EvalResult evaluate(const env::PolicyFn& policy, const env::GridworldSpec& spec, std::size_t episodes, std::uint64_t seed);
EvalResult evaluate(const policy::PolicyNetwork& policy, const env::GridworldSpec& spec, std::size_t episodes,
                    std::uint64_t seed);

struct PretrainReport {
    double initial_mse = 0.0;
    double final_mse = 0.0;
    std::size_t updates = 0;
};

// Reconstruction (+ binarization regulariser when masked in) on the union of expert and random
// demonstration states; the head is untouched. No-op for variants without an autoencoder.
PretrainReport pretrain_autoencoder(reward::RewardModel& model, const env::DemonstrationSet& expert_demos,
                                    const env::DemonstrationSet& random_demos, std::size_t updates,
                                    std::size_t batch_size, double learning_rate, Rng& rng);

struct EvalRow {
    std::size_t env_step = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct TrialResult {
    std::uint64_t seed = 0;
    std::filesystem::path run_dir;
    std::vector<MetricsRow> metrics;
    std::vector<EvalRow> evals;
    EvalResult final_eval;
    PretrainReport pretrain;
    reward::CodeExport codes;
};

// One seed of the alternating loop. Writes metrics.csv, eval.csv, timing.csv, config.txt,
// checkpoints/ and codes/ below output_dir/<variant>/seed_<seed>.
TrialResult run_trial(const ExperimentConfig& config, std::uint64_t seed, const env::DemonstrationSet& expert_demos,
                      const env::DemonstrationSet& random_demos);

// Loads the demonstrations (startup error when missing) and runs every configured seed.
std::vector<TrialResult> run_experiment(const ExperimentConfig& config);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

// Spearman(pr_agent, true_return) over metrics rows; needs >= 10 rows.
double reward_correlation_report(std::span<const MetricsRow> metrics);

}  // namespace hashreward::harness
