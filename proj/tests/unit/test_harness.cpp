#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hashreward/errors.hpp"
#include "hashreward/harness/experiment.hpp"

using namespace hashreward;
using namespace hashreward::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hashreward_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// 4x4 open map, 2-pixel cells: small enough for full runs inside a unit test.
env::GridworldSpec small_spec() {
    env::GridworldSpec spec;
    spec.grid_size = 4;
    spec.cell_pixels = 2;
    spec.goal = {3, 3};
    spec.start_distribution = {{{0, 0}, 1.0}};
    spec.horizon = 16;
    return spec;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig c;
    c.env = small_spec();
    c.demo_count = 4;
    c.code_length = 8;
    c.encoder_hidden = 16;
    c.head_hidden = 8;
    c.policy_hidden = 16;
    c.pretrain_updates = 20;
    c.pretrain_batch = 16;
    c.total_env_steps = 600;
    c.steps_per_iter = 50;
    c.reward_batch_learner = 16;
    c.reward_batch_expert = 16;
    c.reward_updates_per_phase = 2;
    c.eval_interval = 2;
    c.eval_episodes = 3;
    c.checkpoint_interval = 2;
    c.code_samples = 10;
    c.output_dir = out;
    return c;
}

env::DemonstrationSet expert_demos(const env::GridworldSpec& spec, std::size_t m) {
    const auto expert = env::value_iteration_expert(spec, 1e-10);
    return env::collect_demonstrations(spec, env::expert_policy(spec, expert), m, 0, env::DemoSource::expert);
}

}  // namespace

TEST_CASE("config key-value round trip") {
    ExperimentConfig c;
    c.variant = reward::Variant::gail_uh_up;
    c.seeds = {3, 1, 4};
    c.lambda = 0.1 / 3.0;
    c.env.slip_probability = 0.123456789;
    c.absorbing_terminal = false;
    const auto kv = to_key_values(c);
    const auto back = config_from(kv);
    CHECK(to_key_values(back) == kv);
    CHECK(back.seeds == c.seeds);
    CHECK(back.lambda == c.lambda);
    CHECK(back.env.hash() == c.env.hash());
    CHECK(back.variant == c.variant);
    CHECK_FALSE(back.absorbing_terminal);

    CHECK_THROWS_AS(config_from({{"no_such_key", "1"}}), InputError);
    CHECK_THROWS_AS(config_from({{"learner_ratio", "x"}}), InputError);
    CHECK_THROWS_AS(config_from({{"goal", "7"}}), InputError);
}

TEST_CASE("config invariants and iteration count") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    // 300k steps at 3 x 2048 per iteration.
    CHECK(c.iterations() == 49);
    auto bad = c;
    bad.seeds.clear();
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = c;
    bad.total_env_steps = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = c;
    bad.learner_ratio = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("spearman against hand-ranked data") {
    const double x[] = {1, 2, 3, 4, 5};
    const double up[] = {2, 4, 8, 16, 32};
    const double down[] = {5, 4, 3, 2, 1};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
    // Ties: ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): Pearson of ranks by hand.
    const double tied[] = {1, 2, 2, 3};
    const double plain[] = {1, 2, 3, 4};
    const double expected = 4.5 / std::sqrt(4.5 * 5.0);
    CHECK(spearman(tied, plain) == doctest::Approx(expected).epsilon(1e-12));
    const double one[] = {1};
    CHECK_THROWS_AS(spearman(one, one), InputError);
    const double constant[] = {2, 2, 2, 2};
    CHECK_THROWS_AS(spearman(constant, plain), InputError);
    CHECK_THROWS_AS(spearman(x, plain), InputError);
}

TEST_CASE("reward correlation needs ten rows") {
    std::vector<MetricsRow> rows(9);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].pr_agent = static_cast<double>(i);
        rows[i].true_return = static_cast<double>(i * i);
    }
    CHECK_THROWS_AS(reward_correlation_report(rows), InputError);
    rows.push_back({});
    rows.back().pr_agent = 9;
    rows.back().true_return = 81;
    CHECK(reward_correlation_report(rows) == doctest::Approx(1.0));
}

TEST_CASE("metrics csv round trip") {
    const auto dir = scratch_dir("csv");
    MetricsRow row{6144, 0.5, 0.05, 0.06, 12.5, 1.25, 0.6, 0.4, 1.1, 0.0};
    {
        std::ofstream out(dir / "metrics.csv");
        out << kMetricsHeader << '\n' << format_metrics_row(row) << '\n';
    }
    const auto rows = read_metrics_csv(dir / "metrics.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].env_step == 6144);
    CHECK(rows[0].loss_h == 12.5);
    CHECK(rows[0].d_agent == 0.4);
    {
        std::ofstream out(dir / "bad.csv");
        out << "env_step,true_return\n1,2\n";
    }
    CHECK_THROWS_AS(read_metrics_csv(dir / "bad.csv"), FormatError);
}

TEST_CASE("evaluation of fixed policies") {
    auto spec = env::GridworldSpec::standard();
    spec.slip_probability = 0.0;
    spec.start_distribution = {{{0, 0}, 1.0}};
    const auto expert = env::value_iteration_expert(spec, 1e-12);
    const auto e = evaluate(env::expert_policy(spec, expert), spec, 5, 10);
    CHECK(e.returns.size() == 5);
    CHECK(e.stddev == doctest::Approx(0.0));
    // Undiscounted return of a shortest path: goal reward plus one penalty per non-goal step.
    const auto path = env::rollout(spec, env::expert_policy(spec, expert), 0, true);
    CHECK(e.mean == doctest::Approx(spec.goal_reward + spec.step_penalty * static_cast<double>(path.size() - 1)));

    const auto standard = env::GridworldSpec::standard();
    const auto a = evaluate(env::uniform_policy(), standard, 20, 424242);
    const auto b = evaluate(env::uniform_policy(), standard, 20, 424242);
    CHECK(a.returns == b.returns);
    CHECK(a.mean < 0.0);
}

TEST_CASE("autoencoder pretraining") {
    const auto spec = small_spec();
    reward::RewardModelConfig mc;
    mc.pixel_count = spec.pixel_count();
    mc.code_length = 8;
    mc.encoder_hidden = 32;
    mc.head_hidden = 8;
    const auto expert = expert_demos(spec, 10);
    const auto random = env::collect_demonstrations(spec, env::uniform_policy(), 10, 100, env::DemoSource::random);

    auto rng = make_rng(3);
    auto gail = reward::RewardModel::create(mc, reward::Variant::gail, rng);
    const auto before = gail;
    auto prng = make_rng(4);
    const auto none = pretrain_autoencoder(gail, expert, random, 100, 16, 1e-3, prng);
    CHECK(none.updates == 0);
    CHECK(gail.encoder.layer(0).weight == before.encoder.layer(0).weight);

    auto model = reward::RewardModel::create(mc, reward::Variant::hashreward, rng);
    const auto head = model.head.layer(0).weight;
    // Held out: random-policy states from unrelated seeds.
    const auto held = env::collect_demonstrations(spec, env::uniform_policy(), 10, 9000, env::DemoSource::random);
    std::vector<env::PixelState> held_states;
    for (const auto& t : held.trajectories) held_states.insert(held_states.end(), t.states.begin(), t.states.end());
    const auto held_matrix = reward::to_matrix(held_states);
    const double untrained = reward::reconstruction_mse(model, held_matrix);
    const auto report = pretrain_autoencoder(model, expert, random, 20000, 64, 3e-4, prng);
    CHECK(report.updates == 20000);
    CHECK(report.final_mse < report.initial_mse);
    CHECK(reward::reconstruction_mse(model, held_matrix) <= 0.1 * untrained);
    CHECK(model.head.layer(0).weight == head);
}

TEST_CASE("a small trial writes its artifacts and is reproducible") {
    const auto dir = scratch_dir("trial");
    auto config = small_config(dir / "a");
    const auto expert = expert_demos(config.env, config.demo_count);
    const auto random =
        env::collect_demonstrations(config.env, env::uniform_policy(), config.demo_count, 50000, env::DemoSource::random);
    const auto first = run_trial(config, 7, expert, random);
    config.output_dir = dir / "b";
    const auto second = run_trial(config, 7, expert, random);

    REQUIRE(first.metrics.size() == config.iterations());
    CHECK(config.iterations() == 4);
    for (std::size_t i = 0; i < first.metrics.size(); ++i) {
        // Three rollout phases of steps_per_iter each per reward-model phase.
        CHECK(first.metrics[i].env_step == (i + 1) * config.learner_ratio * config.steps_per_iter);
        CHECK(first.metrics[i].seconds == 0.0);
    }
    CHECK(first.evals.size() == 2);
    const auto run_a = dir / "a" / "hashreward" / "seed_7";
    const auto run_b = dir / "b" / "hashreward" / "seed_7";
    CHECK(slurp(run_a / "metrics.csv") == slurp(run_b / "metrics.csv"));
    CHECK(slurp(run_a / "eval.csv") == slurp(run_b / "eval.csv"));
    for (const char* name : {"iter_0002_policy.bin", "iter_0004_reward.bin", "final_policy.bin", "final_reward.bin"}) {
        CHECK(fs::exists(run_a / "checkpoints" / name));
    }
    CHECK(fs::exists(run_a / "config.txt"));
    CHECK(first.codes.group_names.size() == 3);
    CHECK(read_metrics_csv(run_a / "metrics.csv").size() == first.metrics.size());

    // The configuration written next to the run reproduces the run's key values.
    const auto stored = config_from(load_key_values(run_a / "config.txt"));
    CHECK(stored.code_length == config.code_length);
    CHECK(stored.env.hash() == config.env.hash());
}

TEST_CASE("gail trial without an autoencoder") {
    const auto dir = scratch_dir("gail");
    auto config = small_config(dir);
    config.variant = reward::Variant::gail;
    const auto expert = expert_demos(config.env, config.demo_count);
    const auto random =
        env::collect_demonstrations(config.env, env::uniform_policy(), config.demo_count, 50000, env::DemoSource::random);
    const auto trial = run_trial(config, 1, expert, random);
    CHECK(trial.pretrain.updates == 0);
    for (const auto& row : trial.metrics) {
        CHECK(row.loss_h == 0.0);
        CHECK(row.d_agent > 0.0);
        CHECK(row.d_agent < 1.0);
    }
}

TEST_CASE("missing demonstrations are a startup error") {
    auto config = small_config(scratch_dir("missing"));
    CHECK_THROWS_AS(run_experiment(config), ConfigurationError);
    config.expert_demos = "/nonexistent/expert.jsonl";
    CHECK_THROWS_AS(run_experiment(config), ConfigurationError);
}

#ifdef HASHREWARD_CLI
TEST_CASE("command line front end") {
    const auto dir = scratch_dir("cli");
    const std::string cli = HASHREWARD_CLI;
    const auto run = [&](const std::string& args) {
        const auto cmd = cli + " " + args + " > " + (dir / "out.txt").string() + " 2>&1";
        return std::system(cmd.c_str());
    };
    CHECK(run("expert-train --episodes 3") == 0);
    CHECK(slurp(dir / "out.txt").find("start_state_value = 0.775") != std::string::npos);
    CHECK(run("collect-demos --m 2 --out " + (dir / "d.jsonl").string()) == 0);
    CHECK(env::load_demonstrations(dir / "d.jsonl").trajectories.size() == 2);
    CHECK(run("imitate --set no_such_key=1") != 0);
    CHECK(slurp(dir / "out.txt").find("error:") != std::string::npos);
    CHECK(run("imitate --expert-demos " + (dir / "none.jsonl").string()) != 0);
}
#endif
