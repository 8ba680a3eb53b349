#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hashreward/env/gridworld.hpp"
#include "hashreward/errors.hpp"
#include "hashreward/harness/experiment.hpp"
#include "hashreward/nn/gradient_check.hpp"
#include "hashreward/policy/policy.hpp"

using namespace hashreward;
using namespace hashreward::policy;
namespace fs = std::filesystem;

namespace {

PolicyConfig tiny_config() {
    PolicyConfig c;
    c.pixel_count = 5;
    c.hidden = 6;
    return c;
}

Matrix random_states(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng);
    return m;
}

}  // namespace

TEST_CASE("GAE matches the explicit discounted sum of TD errors") {
    RolloutBatch b;
    b.rewards = {1.0, 0.5, -0.2, 0.3, 0.7};
    b.values = {0.1, 0.4, -0.3, 0.2, 0.6};
    b.dones = {0, 1, 0, 0, 0};
    b.bootstrap_value = 0.25;
    b.actions.assign(5, 0);
    const double gamma = 0.9;
    const double lambda = 0.8;
    const auto out = compute_advantages(b, gamma, lambda);

    // Oracle: A_t = sum_k (gamma lambda)^k delta_{t+k}, truncated at the episode end.
    const std::vector<double> next_v = {0.4, 0.0, 0.2, 0.6, 0.25};
    const std::vector<int> episode_end = {1, 1, 4, 4, 4};
    for (std::size_t t = 0; t < 5; ++t) {
        double a = 0.0;
        double w = 1.0;
        for (std::size_t k = t; k <= static_cast<std::size_t>(episode_end[t]); ++k) {
            a += w * (b.rewards[k] + gamma * next_v[k] - b.values[k]);
            w *= gamma * lambda;
        }
        CHECK(out.advantages[t] == doctest::Approx(a).epsilon(1e-12));
        CHECK(out.returns[t] == doctest::Approx(a + b.values[t]).epsilon(1e-12));
    }
    // Hand value for the terminal step of the first episode: r - V = 0.5 - 0.4.
    CHECK(out.advantages[1] == doctest::Approx(0.1).epsilon(1e-12));

    b.terminal_values = {0.0, 2.0, 0.0, 0.0, 0.0};
    const auto boot = compute_advantages(b, gamma, lambda);
    CHECK(boot.advantages[1] == doctest::Approx(0.1 + gamma * 2.0).epsilon(1e-12));
    CHECK(boot.advantages[3] == doctest::Approx(out.advantages[3]).epsilon(1e-15));

    b.bootstrap_value.reset();
    CHECK_THROWS_AS(compute_advantages(b, gamma, lambda), InputError);
}

TEST_CASE("advantage normalization") {
    std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    normalize_advantages(a);
    double mean = 0.0;
    double sq = 0.0;
    for (double x : a) {
        mean += x / 4.0;
        sq += x * x / 4.0;
    }
    CHECK(std::abs(mean) < 1e-12);
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-6));
    std::vector<double> flat(10, 3.5);
    normalize_advantages(flat);
    for (double x : flat) CHECK(x == 0.0);
}

TEST_CASE("sampling frequencies of a uniform policy") {
    const auto policy = PolicyNetwork::zeros(tiny_config());
    env::PixelState s{1, 5, std::vector<float>(5, 0.3F)};
    auto rng = make_rng(42);
    std::array<int, 4> counts{};
    constexpr int n = 1000000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(act(policy, s, rng).action)];
    for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.25) < 0.002);
    const auto r = act(policy, s, rng);
    CHECK(r.log_prob == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    CHECK(r.value == 0.0);
    // Greedy ties go to the lowest index.
    CHECK(act(policy, s, rng, true).action == 0);
    auto biased = policy;
    biased.policy_head.layer(0).bias[2] = 1.0;
    biased.policy_head.layer(0).bias[3] = 1.0;
    CHECK(act(biased, s, rng, true).action == 2);
}

TEST_CASE("PPO composite loss passes the finite-difference check") {
    auto rng = make_rng(6);
    auto policy = PolicyNetwork::create(tiny_config(), rng);
    const auto states = random_states(rng, 12, 5);
    std::vector<int> actions;
    std::vector<double> old_lp, adv, ret;
    const auto eval = evaluate_states(policy, states);
    for (Eigen::Index i = 0; i < 12; ++i) {
        const int a = static_cast<int>(uniform_index(rng, 4));
        actions.push_back(a);
        // Shift old log-probs so both clip branches occur.
        old_lp.push_back(eval.log_probs(i, a) + 0.6 * (uniform01(rng) - 0.5));
        adv.push_back(2.0 * uniform01(rng) - 1.0);
        ret.push_back(uniform01(rng));
    }
    PpoConfig config;
    const auto loss = ppo_loss(policy, states, actions, old_lp, adv, ret, config);
    CHECK(loss.clip_fraction > 0.0);
    nn::GradientCheckOptions options;
    options.max_probes = 2000;
    const auto result = nn::gradient_check(policy.parameters(), loss.gradient_views(), [&] {
        const auto probe = ppo_loss(policy, states, actions, old_lp, adv, ret, config);
        return nn::ProbeEvaluation{probe.total, probe.piece};
    }, options);
    CHECK(result.probes > 100);
    CHECK(result.max_relative_error < 1e-4);
}

TEST_CASE("unit ratio gives the vanilla policy gradient") {
    auto rng = make_rng(13);
    auto policy = PolicyNetwork::create(tiny_config(), rng);
    const auto states = random_states(rng, 8, 5);
    const auto eval = evaluate_states(policy, states);
    std::vector<int> actions;
    std::vector<double> old_lp, adv, ret(8, 0.0);
    for (Eigen::Index i = 0; i < 8; ++i) {
        actions.push_back(static_cast<int>(uniform_index(rng, 4)));
        old_lp.push_back(eval.log_probs(i, actions.back()));
        adv.push_back(2.0 * uniform01(rng) - 1.0);
    }
    PpoConfig config;
    config.entropy_coef = 0.0;
    config.value_coef = 0.0;
    const auto loss = ppo_loss(policy, states, actions, old_lp, adv, ret, config);
    CHECK(loss.clip_fraction == 0.0);
    CHECK(std::abs(loss.approx_kl) < 1e-15);
    // -mean(A log pi(a|s)) differentiated numerically.
    const auto vanilla = [&] {
        const auto e = evaluate_states(policy, states);
        double j = 0.0;
        for (Eigen::Index i = 0; i < 8; ++i) j -= adv[static_cast<std::size_t>(i)] * e.log_probs(i, actions[static_cast<std::size_t>(i)]) / 8.0;
        return nn::ProbeEvaluation{j, 0};
    };
    nn::GradientCheckOptions options;
    options.max_probes = 400;
    CHECK(nn::gradient_check(policy.parameters(), loss.gradient_views(), vanilla, options).max_relative_error < 1e-5);
}

TEST_CASE("constant advantages leave the policy nearly unchanged") {
    auto rng = make_rng(19);
    auto policy = PolicyNetwork::create(tiny_config(), rng);
    const auto before = policy;
    RolloutBatch batch;
    batch.states = random_states(rng, 128, 5);
    const auto eval = evaluate_states(policy, batch.states);
    for (Eigen::Index i = 0; i < 128; ++i) {
        batch.actions.push_back(static_cast<int>(uniform_index(rng, 4)));
        batch.log_probs.push_back(eval.log_probs(i, batch.actions.back()));
        batch.values.push_back(eval.values[i]);
        batch.advantages.push_back(0.37);
        batch.returns.push_back(eval.values[i] + 0.37);
    }
    PpoTrainer trainer(policy, PpoConfig{}, 10);
    trainer.ppo_update(policy, batch, rng);
    const auto after = evaluate_states(policy, batch.states);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < 128; ++i) {
        for (Eigen::Index a = 0; a < 4; ++a) kl += eval.probabilities(i, a) * (eval.log_probs(i, a) - after.log_probs(i, a)) / 128.0;
    }
    CHECK(kl < 1e-3);
    CHECK_FALSE(policy == before);
}

TEST_CASE("environment runner continues episodes across calls") {
    auto spec = env::GridworldSpec::standard();
    const auto policy = PolicyNetwork::zeros(PolicyConfig{});
    EnvRunner runner(spec, 3);
    const auto a = runner.collect(policy, 100);
    CHECK(a.size() == 100);
    CHECK(a.dones.size() == 100);
    CHECK(a.truncation_values.size() == 100);
    const auto b = runner.collect(policy, 100);
    if (!a.dones.back()) CHECK(a.bootstrap_value.has_value());
    // Episode length never exceeds the horizon: at least one boundary within any 64 + 1 steps.
    int run = 0;
    for (std::size_t t = 0; t < 100; ++t) {
        run = b.dones[t] ? 0 : run + 1;
        CHECK(run < spec.horizon);
    }
    EnvRunner again(spec, 3);
    const auto a2 = again.collect(policy, 100);
    CHECK(a2.actions == a.actions);
    CHECK(a2.states == a.states);
    CHECK_THROWS_AS(runner.collect(policy, 0), InputError);
}

TEST_CASE("PPO with true rewards solves a small open map") {
    env::GridworldSpec spec;
    spec.grid_size = 4;
    spec.cell_pixels = 1;
    spec.goal = {3, 3};
    spec.start_distribution = {{{0, 0}, 1.0}};
    spec.slip_probability = 0.0;
    spec.horizon = 20;
    PolicyConfig config;
    config.pixel_count = spec.pixel_count();
    config.hidden = 32;
    auto rng = make_rng(0);
    auto policy = PolicyNetwork::create(config, rng);
    PpoConfig ppo;
    ppo.learning_rate = 1e-3;
    PpoTrainer trainer(policy, ppo, 30);
    EnvRunner runner(spec, 0);
    for (int it = 0; it < 30; ++it) train_policy_step(policy, trainer, runner, true_reward_labeler(), 512, rng);
    // Six moves to the goal: 5 * -0.01 + 1.
    CHECK(harness::evaluate(policy, spec, 5, 0).mean == doctest::Approx(0.95).epsilon(1e-9));
}

TEST_CASE("policy checkpoint round trip") {
    auto rng = make_rng(1);
    auto policy = PolicyNetwork::create(tiny_config(), rng);
    for (auto view : policy.parameters()) {
        for (auto& p : view) p = static_cast<double>(static_cast<float>(p));
    }
    const auto path = fs::temp_directory_path() / "hashreward_policy_test.bin";
    save_policy(path, policy);
    CHECK(load_policy(path) == policy);
    fs::remove(path);
    CHECK_THROWS_AS(load_policy(path), FormatError);
}
