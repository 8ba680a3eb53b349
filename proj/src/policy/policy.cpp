#include "hashreward/policy/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "hashreward/errors.hpp"
#include "hashreward/nn/checkpoint.hpp"

namespace hashreward::policy {

namespace {

constexpr std::array<nn::Activation, 2> kTrunkActs{nn::Activation::tanh, nn::Activation::tanh};
constexpr std::array<nn::Activation, 1> kLinear{nn::Activation::identity};

Matrix log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double peak = logits.row(r).maxCoeff();
        const double lse = peak + std::log((logits.row(r).array() - peak).exp().sum());
        out.row(r) = logits.row(r).array() - lse;
    }
    return out;
}

Matrix pixels_row(const env::PixelState& state) {
    Matrix row(1, static_cast<Eigen::Index>(state.intensities.size()));
    for (std::size_t i = 0; i < state.intensities.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = state.intensities[i];
    return row;
}

}  // namespace

PolicyNetwork PolicyNetwork::create(const PolicyConfig& config, Rng& rng) {
    const std::array<std::size_t, 3> trunk{config.pixel_count, config.hidden, config.hidden};
    const std::array<std::size_t, 2> pi{config.hidden, config.action_count};
    const std::array<std::size_t, 2> v{config.hidden, 1};
    PolicyNetwork p;
    p.trunk = nn::DenseNet::xavier(trunk, kTrunkActs, rng);
    p.policy_head = nn::DenseNet::xavier(pi, kLinear, rng);
    p.value_head = nn::DenseNet::xavier(v, kLinear, rng);
    return p;
}

PolicyNetwork PolicyNetwork::zeros(const PolicyConfig& config) {
    const std::array<std::size_t, 3> trunk{config.pixel_count, config.hidden, config.hidden};
    const std::array<std::size_t, 2> pi{config.hidden, config.action_count};
    const std::array<std::size_t, 2> v{config.hidden, 1};
    PolicyNetwork p;
    p.trunk = nn::DenseNet::zeros(trunk, kTrunkActs);
    p.policy_head = nn::DenseNet::zeros(pi, kLinear);
    p.value_head = nn::DenseNet::zeros(v, kLinear);
    return p;
}

nn::ParameterViews PolicyNetwork::parameters() {
    auto views = trunk.parameters();
    for (auto v : policy_head.parameters()) views.push_back(v);
    for (auto v : value_head.parameters()) views.push_back(v);
    return views;
}

nn::GradientViews PpoLoss::gradient_views() const {
    auto views = trunk_gradients.views();
    for (auto v : policy_gradients.views()) views.push_back(v);
    for (auto v : value_gradients.views()) views.push_back(v);
    return views;
}

PolicyEvaluation evaluate_states(const PolicyNetwork& policy, const Matrix& states) {
    const Matrix hidden = nn::predict(policy.trunk, states);
    PolicyEvaluation out;
    out.log_probs = log_softmax(nn::predict(policy.policy_head, hidden));
    out.probabilities = out.log_probs.array().exp().matrix();
    out.values = nn::predict(policy.value_head, hidden).col(0);
    return out;
}

ActResult act(const PolicyNetwork& policy, const env::PixelState& state, Rng& rng, bool greedy) {
    const auto eval = evaluate_states(policy, pixels_row(state));
    const auto a_count = eval.probabilities.cols();
    int action = 0;
    if (greedy) {
        for (Eigen::Index a = 1; a < a_count; ++a) {
            if (eval.probabilities(0, a) > eval.probabilities(0, action)) action = static_cast<int>(a);
        }
    } else {
        const double u = uniform01(rng);
        double acc = 0.0;
        action = static_cast<int>(a_count - 1);
        for (Eigen::Index a = 0; a < a_count; ++a) {
            acc += eval.probabilities(0, a);
            if (u < acc) {
                action = static_cast<int>(a);
                break;
            }
        }
    }
    return ActResult{action, eval.log_probs(0, action), eval.values[0]};
}

env::PolicyFn as_policy_fn(const PolicyNetwork& policy, bool greedy) {
    return [&policy, greedy](env::Cell, const env::PixelState& state, Rng& rng) { return act(policy, state, rng, greedy).action; };
}

Advantages compute_advantages(const RolloutBatch& batch, double gamma, double gae_lambda) {
    const auto n = batch.size();
    if (batch.rewards.size() != n || batch.values.size() != n || batch.dones.size() != n) {
        throw InputError("rollout batch columns have different lengths");
    }
    if (!batch.terminal_values.empty() && batch.terminal_values.size() != n) {
        throw InputError("terminal values must be empty or cover every step");
    }
    if (n == 0) return {};
    if (!batch.dones.back() && !batch.bootstrap_value) {
        throw InputError("rollout batch ends mid-episode without a bootstrap value (unmarked episode boundary)");
    }
    Advantages out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double running = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const bool done = batch.dones[t] != 0;
        double next_value = done && !batch.terminal_values.empty() ? batch.terminal_values[t] : 0.0;
        if (!done) next_value = t + 1 < n ? batch.values[t + 1] : *batch.bootstrap_value;
        const double delta = batch.rewards[t] + gamma * next_value - batch.values[t];
        running = delta + (done ? 0.0 : gamma * gae_lambda * running);
        out.advantages[t] = running;
        out.returns[t] = running + batch.values[t];
    }
    return out;
}

void normalize_advantages(std::vector<double>& advantages) {
    if (advantages.empty()) return;
    const double n = static_cast<double>(advantages.size());
    const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    var /= n;
    const double scale = 1.0 / (std::sqrt(var) + 1e-8);
    for (auto& a : advantages) a = (a - mean) * scale;
}

PpoLoss ppo_loss(const PolicyNetwork& policy, const Matrix& states, std::span<const int> actions,
                 std::span<const double> old_log_probs, std::span<const double> advantages,
                 std::span<const double> returns, const PpoConfig& config) {
    const auto m = actions.size();
    if (m == 0 || static_cast<std::size_t>(states.rows()) != m || old_log_probs.size() != m || advantages.size() != m ||
        returns.size() != m) {
        throw InputError("ppo minibatch columns have different lengths");
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    const auto trunk_cache = nn::forward(policy.trunk, states);
    const auto pi_cache = nn::forward(policy.policy_head, trunk_cache.output());
    const auto v_cache = nn::forward(policy.value_head, trunk_cache.output());
    const Matrix log_probs = log_softmax(pi_cache.output());
    const Matrix probs = log_probs.array().exp().matrix();

    PpoLoss out;
    std::uint64_t piece = 0xCBF29CE484222325ULL;
    Matrix logit_grad = Matrix::Zero(static_cast<Eigen::Index>(m), log_probs.cols());
    Matrix value_grad(static_cast<Eigen::Index>(m), 1);
    for (std::size_t i = 0; i < m; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const int a = actions[i];
        if (a < 0 || a >= log_probs.cols()) throw InputError("invalid action in ppo minibatch");
        const double log_ratio = log_probs(r, a) - old_log_probs[i];
        const double ratio = std::exp(log_ratio);
        const double adv = advantages[i];
        const double clipped = std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
        const double surr1 = ratio * adv;
        const double surr2 = clipped * adv;
        const bool unclipped_branch = surr1 <= surr2;
        piece = (piece ^ (unclipped_branch ? 1U : 0U)) * 0x100000001B3ULL;
        out.policy_loss -= std::min(surr1, surr2) * inv_m;
        out.clip_fraction += (std::abs(ratio - 1.0) > config.clip_epsilon ? 1.0 : 0.0) * inv_m;
        out.approx_kl += ((ratio - 1.0) - log_ratio) * inv_m;

        // d(-surrogate)/d(log pi(a))
        const double dlogp = unclipped_branch ? -adv * ratio * inv_m : 0.0;
        double entropy = 0.0;
        for (Eigen::Index k = 0; k < log_probs.cols(); ++k) entropy -= probs(r, k) * log_probs(r, k);
        out.entropy += entropy * inv_m;
        for (Eigen::Index k = 0; k < log_probs.cols(); ++k) {
            const double p = probs(r, k);
            logit_grad(r, k) += dlogp * ((k == a ? 1.0 : 0.0) - p);
            // d(-c * H)/dz_k = c * p_k (log p_k + H)
            logit_grad(r, k) += config.entropy_coef * inv_m * p * (log_probs(r, k) + entropy);
        }
        const double v = v_cache.output()(r, 0);
        out.value_loss += (v - returns[i]) * (v - returns[i]) * inv_m;
        value_grad(r, 0) = 2.0 * config.value_coef * (v - returns[i]) * inv_m;
    }
    out.total = out.policy_loss + config.value_coef * out.value_loss - config.entropy_coef * out.entropy;

    auto pi_back = nn::backward(policy.policy_head, pi_cache, logit_grad);
    auto v_back = nn::backward(policy.value_head, v_cache, value_grad);
    out.policy_gradients = std::move(pi_back.gradients);
    out.value_gradients = std::move(v_back.gradients);
    out.trunk_gradients = nn::backward(policy.trunk, trunk_cache, pi_back.input_gradient + v_back.input_gradient).gradients;
    out.piece = piece;
    return out;
}

PpoTrainer::PpoTrainer(PolicyNetwork& policy, const PpoConfig& config, std::uint64_t total_updates)
    : config_(config), adam_(nn::AdamState::for_parameters(policy.parameters())), total_updates_(total_updates) {
    if (!(config.clip_epsilon > 0.0 && config.clip_epsilon < 1.0)) throw InputError("clip epsilon must lie in (0, 1)");
    if (config.epochs < 1 || config.minibatch_size < 1) throw InputError("ppo needs >= 1 epoch and minibatch size >= 1");
}

PpoDiagnostics PpoTrainer::ppo_update(PolicyNetwork& policy, const RolloutBatch& batch, Rng& rng) {
    const auto n = batch.size();
    if (batch.advantages.size() != n || batch.returns.size() != n || batch.log_probs.size() != n) {
        throw InputError("ppo update needs advantages, returns and log-probs for every sample");
    }
    if (n == 0) throw InputError("ppo update on an empty batch");
    auto advantages = batch.advantages;
    normalize_advantages(advantages);
    const double lr = nn::linear_decay(config_.learning_rate, updates_, total_updates_);
    ++updates_;

    PpoDiagnostics diag;
    std::size_t minibatches = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto mb = std::min(config_.minibatch_size, n);
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start + mb <= n; start += mb) {
            Matrix states(static_cast<Eigen::Index>(mb), batch.states.cols());
            std::vector<int> actions(mb);
            std::vector<double> old_lp(mb), adv(mb), ret(mb);
            for (std::size_t k = 0; k < mb; ++k) {
                const auto idx = order[start + k];
                states.row(static_cast<Eigen::Index>(k)) = batch.states.row(static_cast<Eigen::Index>(idx));
                actions[k] = batch.actions[idx];
                old_lp[k] = batch.log_probs[idx];
                adv[k] = advantages[idx];
                ret[k] = batch.returns[idx];
            }
            const auto loss = ppo_loss(policy, states, actions, old_lp, adv, ret, config_);
            if (!std::isfinite(loss.total)) throw NumericError("ppo loss is not finite");
            nn::adam_step(policy.parameters(), loss.gradient_views(), adam_, lr);
            diag.clip_fraction += loss.clip_fraction;
            diag.approx_kl += loss.approx_kl;
            diag.entropy += loss.entropy;
            diag.policy_loss += loss.policy_loss;
            diag.value_loss += loss.value_loss;
            ++minibatches;
        }
    }
    if (minibatches > 0) {
        const double inv = 1.0 / static_cast<double>(minibatches);
        diag.clip_fraction *= inv;
        diag.approx_kl *= inv;
        diag.entropy *= inv;
        diag.policy_loss *= inv;
        diag.value_loss *= inv;
    }
    return diag;
}

EnvRunner::EnvRunner(env::GridworldSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), env_rng_(make_rng(seed, 11)), policy_rng_(make_rng(seed, 12)) {
    spec_.validate();
    auto start = env::reset(spec_, env_rng_);
    state_ = start.state;
    observation_ = std::move(start.observation);
}

namespace {

Matrix state_row(const env::PixelState& state) {
    Matrix row(1, static_cast<Eigen::Index>(state.intensities.size()));
    for (std::size_t i = 0; i < state.intensities.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = state.intensities[i];
    return row;
}

}  // namespace

RolloutBatch EnvRunner::collect(const PolicyNetwork& policy, std::size_t steps) {
    if (steps == 0) throw InputError("rollout needs at least one step");
    RolloutBatch batch;
    batch.states.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(spec_.pixel_count()));
    for (std::size_t t = 0; t < steps; ++t) {
        const auto decision = act(policy, observation_, policy_rng_);
        for (std::size_t i = 0; i < observation_.intensities.size(); ++i) {
            batch.states(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = observation_.intensities[i];
        }
        auto result = env::step(spec_, state_, decision.action, env_rng_);
        batch.actions.push_back(decision.action);
        batch.log_probs.push_back(decision.log_prob);
        batch.values.push_back(decision.value);
        batch.true_rewards.push_back(result.reward);
        batch.dones.push_back(result.done ? 1 : 0);
        batch.reached_goal.push_back(result.reached_goal ? 1 : 0);
        batch.truncation_values.push_back(0.0);
        episode_return_ += result.reward;
        if (result.done && !result.reached_goal) {
            batch.truncation_values.back() = evaluate_states(policy, state_row(result.observation)).values[0];
        }
        if (result.done) {
            batch.episode_returns.push_back(episode_return_);
            episode_return_ = 0.0;
            auto start = env::reset(spec_, env_rng_);
            state_ = start.state;
            observation_ = std::move(start.observation);
        } else {
            state_ = result.state;
            observation_ = std::move(result.observation);
        }
    }
    if (!batch.dones.back()) batch.bootstrap_value = evaluate_states(policy, state_row(observation_)).values[0];
    return batch;
}

RewardLabeler true_reward_labeler() {
    return [](const RolloutBatch& batch) { return batch.true_rewards; };
}

PolicyStep train_policy_step(PolicyNetwork& policy, PpoTrainer& trainer, EnvRunner& runner,
                             const RewardLabeler& labeler, std::size_t steps_per_iter, Rng& rng) {
    PolicyStep out;
    out.batch = runner.collect(policy, steps_per_iter);
    out.batch.rewards = labeler(out.batch);
    auto adv = compute_advantages(out.batch, trainer.config().gamma, trainer.config().gae_lambda);
    out.batch.advantages = std::move(adv.advantages);
    out.batch.returns = std::move(adv.returns);
    out.diagnostics = trainer.ppo_update(policy, out.batch, rng);
    return out;
}

void save_policy(const std::filesystem::path& path, const PolicyNetwork& policy) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    nn::write_net(out, policy.trunk);
    nn::write_net(out, policy.policy_head);
    nn::write_net(out, policy.value_head);
}

PolicyNetwork load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open policy checkpoint " + path.string());
    PolicyNetwork p;
    p.trunk = nn::read_net(in);
    p.policy_head = nn::read_net(in);
    p.value_head = nn::read_net(in);
    if (p.policy_head.input_dim() != p.trunk.output_dim() || p.value_head.input_dim() != p.trunk.output_dim() ||
        p.value_head.output_dim() != 1) {
        throw FormatError("policy checkpoint networks do not chain");
    }
    return p;
}

}  // namespace hashreward::policy
