// Command-line front end: expert training, demonstration collection, imitation runs,
// policy evaluation, bound reports and hash-code export.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hashreward/env/demonstrations.hpp"
#include "hashreward/env/gridworld.hpp"
#include "hashreward/errors.hpp"
#include "hashreward/harness/experiment.hpp"
#include "hashreward/policy/policy.hpp"
#include "hashreward/reward/reward_model.hpp"
#include "hashreward/theory/bounds.hpp"
#include "hashreward/util/key_value.hpp"

namespace fs = std::filesystem;
using namespace hashreward;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
};

// Config file first, then --set pairs, then the dedicated flags (applied by the caller).
KeyValues gather(const Common& common) {
    KeyValues values;
    if (!common.config_path.empty()) values = load_key_values(common.config_path);
    for (const auto& kv : common.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
        values[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return values;
}

void print_eval(const char* label, const harness::EvalResult& e) {
    std::printf("%s: mean_return = %.6f, std_return = %.6f, episodes = %zu\n", label, e.mean, e.stddev, e.returns.size());
}

double start_value(const env::GridworldSpec& spec, const env::ExpertSolution& expert) {
    double v = 0.0;
    for (const auto& s : spec.start_distribution) v += s.probability * expert.value(spec, s.cell);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial imitation with hashed discriminators on a pixel gridworld"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--config", common.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", common.overrides, "override one configuration key (key=value), repeatable");

    auto* expert_cmd = app.add_subcommand("expert-train", "solve the map by value iteration and evaluate the expert");
    double tolerance = 1e-10;
    std::size_t episodes = 0;
    std::uint64_t eval_seed = 0;
    bool eval_seed_set = false;
    expert_cmd->add_option("--tolerance", tolerance, "Bellman residual tolerance");
    expert_cmd->add_option("--episodes", episodes, "evaluation episodes (default: eval_episodes)");
    expert_cmd->add_option("--eval-seed", eval_seed, "first evaluation seed")->each([&](const std::string&) { eval_seed_set = true; });

    auto* collect_cmd = app.add_subcommand("collect-demos", "roll out the expert or the uniform policy and save trajectories");
    std::string policy_name = "expert";
    std::size_t m = 20;
    std::uint64_t base_seed = 0;
    std::string demos_out = "demos.jsonl";
    collect_cmd->add_option("--policy", policy_name, "expert or random")->check(CLI::IsMember({"expert", "random"}));
    collect_cmd->add_option("--m", m, "number of trajectories")->check(CLI::PositiveNumber);
    collect_cmd->add_option("--seed", base_seed, "seed of the first trajectory");
    collect_cmd->add_option("--out", demos_out, "output file");

    auto* imitate_cmd = app.add_subcommand("imitate", "run the alternating reward-model / PPO loop");
    std::string variant;
    std::vector<std::uint64_t> seeds;
    std::string output_dir;
    std::string expert_demos;
    std::size_t total_steps = 0;
    imitate_cmd->add_option("--variant", variant, "gail, gail-ae, gail-ae-up, gail-uh, gail-uh-up, hashreward-ae or hashreward");
    imitate_cmd->add_option("--seed", seeds, "trial seed, repeatable");
    imitate_cmd->add_option("--output-dir", output_dir, "run directory root");
    imitate_cmd->add_option("--expert-demos", expert_demos, "expert demonstration file");
    imitate_cmd->add_option("--total-steps", total_steps, "environment step budget");

    auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a policy checkpoint");
    std::string checkpoint;
    eval_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--episodes", episodes, "evaluation episodes (default: eval_episodes)");
    eval_cmd->add_option("--eval-seed", eval_seed, "first evaluation seed")->each([&](const std::string&) { eval_seed_set = true; });

    auto* bound_cmd = app.add_subcommand("bound", "generalization bound report for a reward-model checkpoint");
    std::string inputs_path;
    std::string bound_demos;
    bound_cmd->add_option("--checkpoint", checkpoint, "reward-model checkpoint")->required()->check(CLI::ExistingFile);
    bound_cmd->add_option("--inputs", inputs_path, "bound inputs (key = value)")->required()->check(CLI::ExistingFile);
    bound_cmd->add_option("--demos", bound_demos, "demonstrations used for the feature norm when the inputs omit it")
        ->check(CLI::ExistingFile);
    std::string granularity = "state";
    bound_cmd->add_option("--granularity", granularity, "feature rows per state or per trajectory")
        ->check(CLI::IsMember({"state", "trajectory"}));

    auto* codes_cmd = app.add_subcommand("export-codes", "hash codes of demonstration states");
    std::vector<std::string> code_demos;
    std::string codes_out = "codes";
    codes_cmd->add_option("--checkpoint", checkpoint, "reward-model checkpoint")->required()->check(CLI::ExistingFile);
    codes_cmd->add_option("--demos", code_demos, "demonstration file, repeatable (one group each)")->required()
        ->check(CLI::ExistingFile);
    codes_cmd->add_option("--out", codes_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        auto config = harness::config_from(gather(common));
        const auto& spec = config.env;
        if (episodes == 0) episodes = config.eval_episodes;
        if (!eval_seed_set) eval_seed = config.eval_seed;

        if (expert_cmd->parsed()) {
            const auto expert = env::value_iteration_expert(spec, tolerance);
            std::printf("sweeps = %zu, residual = %.3e\n", expert.sweeps, expert.residual);
            std::printf("start_state_value = %.6f\n", start_value(spec, expert));
            print_eval("expert", harness::evaluate(env::expert_policy(spec, expert), spec, episodes, eval_seed));
            print_eval("random", harness::evaluate(env::uniform_policy(), spec, episodes, eval_seed));
        } else if (collect_cmd->parsed()) {
            env::DemonstrationSet demos;
            if (policy_name == "expert") {
                const auto expert = env::value_iteration_expert(spec, 1e-10);
                demos = env::collect_demonstrations(spec, env::expert_policy(spec, expert), m, base_seed, env::DemoSource::expert);
            } else {
                demos = env::collect_demonstrations(spec, env::uniform_policy(), m, base_seed, env::DemoSource::random);
            }
            env::save_demonstrations(demos_out, demos, spec);
            std::printf("wrote %zu trajectories (%zu samples) to %s\n", demos.trajectories.size(), demos.sample_count(),
                        demos_out.c_str());
        } else if (imitate_cmd->parsed()) {
            if (!variant.empty()) config.variant = reward::variant_from_string(variant);
            if (!seeds.empty()) config.seeds = seeds;
            if (!output_dir.empty()) config.output_dir = output_dir;
            if (!expert_demos.empty()) config.expert_demos = expert_demos;
            if (total_steps > 0) config.total_env_steps = total_steps;
            for (const auto& trial : harness::run_experiment(config)) {
                std::printf("seed %llu: %s\n", static_cast<unsigned long long>(trial.seed), trial.run_dir.string().c_str());
                print_eval("  final", trial.final_eval);
            }
        } else if (eval_cmd->parsed()) {
            const auto policy = policy::load_policy(checkpoint);
            print_eval("policy", harness::evaluate(policy, spec, episodes, eval_seed));
            print_eval("random", harness::evaluate(env::uniform_policy(), spec, episodes, eval_seed));
        } else if (bound_cmd->parsed()) {
            const auto model = reward::load_reward_model(checkpoint);
            const auto complexity = theory::model_complexity_report(model.head);
            auto inputs = theory::bound_inputs_from(load_key_values(inputs_path));
            if (inputs.complexity == 0.0) inputs.complexity = complexity.complexity;
            if (inputs.feature_frobenius == 0.0) {
                if (bound_demos.empty()) throw InputError("bound inputs lack feature_frobenius and no --demos file was given");
                const auto demos = env::load_demonstrations(bound_demos);
                std::vector<nn::Matrix> per_trajectory;
                for (const auto& t : demos.trajectories) {
                    per_trajectory.push_back(reward::mapped_features(model, reward::to_matrix(t.states)));
                }
                nn::Matrix features;
                if (granularity == "trajectory") {
                    features = theory::trajectory_feature_matrix(per_trajectory);
                } else {
                    Eigen::Index rows = 0;
                    for (const auto& f : per_trajectory) rows += f.rows();
                    features.resize(rows, per_trajectory.front().cols());
                    Eigen::Index at = 0;
                    for (const auto& f : per_trajectory) {
                        features.middleRows(at, f.rows()) = f;
                        at += f.rows();
                    }
                }
                std::printf("feature_matrix = %td x %td (%s rows)\n", static_cast<std::ptrdiff_t>(features.rows()),
                            static_cast<std::ptrdiff_t>(features.cols()), granularity.c_str());
                inputs.feature_frobenius = theory::feature_frobenius(features);
            }
            const auto terms = theory::generalization_bound_terms(inputs);
            std::cout << theory::format_bound_report(complexity, inputs, terms);
        } else if (codes_cmd->parsed()) {
            const auto model = reward::load_reward_model(checkpoint);
            std::vector<reward::CodeGroup> groups;
            for (const auto& path : code_demos) {
                const auto demos = env::load_demonstrations(path);
                std::vector<env::PixelState> states;
                for (const auto& t : demos.trajectories) states.insert(states.end(), t.states.begin(), t.states.end());
                groups.push_back({fs::path(path).stem().string(), reward::to_matrix(states)});
            }
            const auto codes = reward::export_codes(model, groups);
            reward::write_code_export(codes_out, codes);
            for (std::size_t a = 0; a < groups.size(); ++a) {
                for (std::size_t b = a; b < groups.size(); ++b) {
                    std::printf("mean_hamming[%s][%s] = %.4f\n", groups[a].name.c_str(), groups[b].name.c_str(),
                                codes.mean_hamming[a][b]);
                }
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
