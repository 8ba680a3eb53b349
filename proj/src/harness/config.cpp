#include <cstdio>
#include <sstream>
#include <string>

#include "hashreward/errors.hpp"
#include "hashreward/harness/experiment.hpp"

namespace hashreward::harness {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string current;
    std::istringstream in(text);
    while (std::getline(in, current, sep)) {
        if (!current.empty()) parts.push_back(current);
    }
    return parts;
}

env::Cell parse_cell(const std::string& key, const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 2) throw InputError("key '" + key + "': cell '" + text + "' must be x:y");
    return {static_cast<int>(parse_integer(key, parts[0])), static_cast<int>(parse_integer(key, parts[1]))};
}

std::string format_real(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    const auto v = parse_integer(key, value);
    if (v < 0) throw InputError("key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

}  // namespace

void ExperimentConfig::validate() const {
    env.validate();
    if (seeds.empty()) throw InputError("config needs at least one seed");
    if (total_env_steps == 0) throw InputError("total_env_steps must be > 0");
    if (learner_ratio < 1) throw InputError("learner_ratio must be >= 1");
    if (steps_per_iter < 1) throw InputError("steps_per_iter must be >= 1");
    if (demo_count < 1) throw InputError("demo_count must be >= 1");
    if (reward_batch_learner < 1 || reward_batch_expert < 1) throw InputError("reward batches need both labels");
    if (eval_episodes < 1) throw InputError("eval_episodes must be >= 1");
    if (eval_interval < 1) throw InputError("eval_interval must be >= 1");
    if (!(reward_learning_rate > 0.0) || !(ppo.learning_rate > 0.0)) throw InputError("learning rates must be positive");
}

std::size_t ExperimentConfig::iterations() const {
    const auto per_iteration = learner_ratio * steps_per_iter;
    return (total_env_steps + per_iteration - 1) / per_iteration;
}

ExperimentConfig config_from(const KeyValues& values, ExperimentConfig base) {
    auto& c = base;
    for (const auto& [key, value] : values) {
        if (key == "variant") c.variant = reward::variant_from_string(value);
        else if (key == "demo_count" || key == "m") c.demo_count = parse_count(key, value);
        else if (key == "code_length") c.code_length = parse_count(key, value);
        else if (key == "lambda") c.lambda = parse_real(key, value);
        else if (key == "encoder_hidden") c.encoder_hidden = parse_count(key, value);
        else if (key == "head_hidden") c.head_hidden = parse_count(key, value);
        else if (key == "policy_hidden") c.policy_hidden = parse_count(key, value);
        else if (key == "reward_learning_rate") c.reward_learning_rate = parse_real(key, value);
        else if (key == "policy_learning_rate") c.ppo.learning_rate = parse_real(key, value);
        else if (key == "pretrain_updates") c.pretrain_updates = parse_count(key, value);
        else if (key == "pretrain_batch") c.pretrain_batch = parse_count(key, value);
        else if (key == "total_env_steps") c.total_env_steps = parse_count(key, value);
        else if (key == "learner_ratio") c.learner_ratio = parse_count(key, value);
        else if (key == "reward_updates_per_phase") c.reward_updates_per_phase = parse_count(key, value);
        else if (key == "absorbing_terminal") c.absorbing_terminal = parse_bool(key, value);
        else if (key == "reward_batch_learner") c.reward_batch_learner = parse_count(key, value);
        else if (key == "reward_batch_expert") c.reward_batch_expert = parse_count(key, value);
        else if (key == "steps_per_iter") c.steps_per_iter = parse_count(key, value);
        else if (key == "clip_epsilon") c.ppo.clip_epsilon = parse_real(key, value);
        else if (key == "entropy_coef") c.ppo.entropy_coef = parse_real(key, value);
        else if (key == "value_coef") c.ppo.value_coef = parse_real(key, value);
        else if (key == "ppo_epochs") c.ppo.epochs = static_cast<int>(parse_integer(key, value));
        else if (key == "minibatch_size") c.ppo.minibatch_size = parse_count(key, value);
        else if (key == "ppo_gamma") c.ppo.gamma = parse_real(key, value);
        else if (key == "gae_lambda") c.ppo.gae_lambda = parse_real(key, value);
        else if (key == "eval_interval") c.eval_interval = parse_count(key, value);
        else if (key == "eval_episodes") c.eval_episodes = parse_count(key, value);
        else if (key == "checkpoint_interval") c.checkpoint_interval = parse_count(key, value);
        else if (key == "code_samples") c.code_samples = parse_count(key, value);
        else if (key == "code_rollout_seed") c.code_rollout_seed = parse_count(key, value);
        else if (key == "eval_seed") c.eval_seed = parse_count(key, value);
        else if (key == "seeds") {
            c.seeds.clear();
            for (const auto& s : split(value, ',')) c.seeds.push_back(parse_count(key, s));
        } else if (key == "output_dir") c.output_dir = value;
        else if (key == "expert_demos") c.expert_demos = value;
        else if (key == "random_demos") c.random_demos = value;
        else if (key == "random_demo_seed") c.random_demo_seed = parse_count(key, value);
        else if (key == "record_wall_clock") c.record_wall_clock = parse_bool(key, value);
        else if (key == "grid_size") c.env.grid_size = static_cast<int>(parse_integer(key, value));
        else if (key == "cell_pixels") c.env.cell_pixels = static_cast<int>(parse_integer(key, value));
        else if (key == "walls") {
            c.env.walls.clear();
            for (const auto& w : split(value, ',')) c.env.walls.push_back(parse_cell(key, w));
        } else if (key == "goal") c.env.goal = parse_cell(key, value);
        else if (key == "starts") {
            c.env.start_distribution.clear();
            for (const auto& s : split(value, ',')) {
                const auto parts = split(s, ':');
                if (parts.size() != 3) throw InputError("key 'starts': entry '" + s + "' must be x:y:probability");
                c.env.start_distribution.push_back(
                    {{static_cast<int>(parse_integer(key, parts[0])), static_cast<int>(parse_integer(key, parts[1]))},
                     parse_real(key, parts[2])});
            }
        } else if (key == "step_penalty") c.env.step_penalty = parse_real(key, value);
        else if (key == "goal_reward") c.env.goal_reward = parse_real(key, value);
        else if (key == "horizon") c.env.horizon = static_cast<int>(parse_integer(key, value));
        else if (key == "discount") c.env.discount = parse_real(key, value);
        else if (key == "slip_probability") c.env.slip_probability = parse_real(key, value);
        else throw InputError("unknown config key '" + key + "'");
    }
    return base;
}

KeyValues to_key_values(const ExperimentConfig& c) {
    KeyValues kv;
    kv["variant"] = std::string(reward::to_string(c.variant));
    kv["demo_count"] = std::to_string(c.demo_count);
    kv["code_length"] = std::to_string(c.code_length);
    kv["lambda"] = format_real(c.lambda);
    kv["encoder_hidden"] = std::to_string(c.encoder_hidden);
    kv["head_hidden"] = std::to_string(c.head_hidden);
    kv["policy_hidden"] = std::to_string(c.policy_hidden);
    kv["reward_learning_rate"] = format_real(c.reward_learning_rate);
    kv["policy_learning_rate"] = format_real(c.ppo.learning_rate);
    kv["pretrain_updates"] = std::to_string(c.pretrain_updates);
    kv["pretrain_batch"] = std::to_string(c.pretrain_batch);
    kv["total_env_steps"] = std::to_string(c.total_env_steps);
    kv["learner_ratio"] = std::to_string(c.learner_ratio);
    kv["reward_updates_per_phase"] = std::to_string(c.reward_updates_per_phase);
    kv["absorbing_terminal"] = c.absorbing_terminal ? "true" : "false";
    kv["reward_batch_learner"] = std::to_string(c.reward_batch_learner);
    kv["reward_batch_expert"] = std::to_string(c.reward_batch_expert);
    kv["steps_per_iter"] = std::to_string(c.steps_per_iter);
    kv["clip_epsilon"] = format_real(c.ppo.clip_epsilon);
    kv["entropy_coef"] = format_real(c.ppo.entropy_coef);
    kv["value_coef"] = format_real(c.ppo.value_coef);
    kv["ppo_epochs"] = std::to_string(c.ppo.epochs);
    kv["minibatch_size"] = std::to_string(c.ppo.minibatch_size);
    kv["ppo_gamma"] = format_real(c.ppo.gamma);
    kv["gae_lambda"] = format_real(c.ppo.gae_lambda);
    kv["eval_interval"] = std::to_string(c.eval_interval);
    kv["eval_episodes"] = std::to_string(c.eval_episodes);
    kv["checkpoint_interval"] = std::to_string(c.checkpoint_interval);
    kv["code_samples"] = std::to_string(c.code_samples);
    kv["code_rollout_seed"] = std::to_string(c.code_rollout_seed);
    kv["eval_seed"] = std::to_string(c.eval_seed);
    std::string seeds;
    for (auto s : c.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
    kv["seeds"] = seeds;
    kv["output_dir"] = c.output_dir.string();
    if (!c.expert_demos.empty()) kv["expert_demos"] = c.expert_demos.string();
    if (!c.random_demos.empty()) kv["random_demos"] = c.random_demos.string();
    kv["random_demo_seed"] = std::to_string(c.random_demo_seed);
    kv["record_wall_clock"] = c.record_wall_clock ? "true" : "false";
    kv["grid_size"] = std::to_string(c.env.grid_size);
    kv["cell_pixels"] = std::to_string(c.env.cell_pixels);
    std::string walls;
    for (const auto& w : c.env.walls) walls += (walls.empty() ? "" : ",") + std::to_string(w.x) + ":" + std::to_string(w.y);
    kv["walls"] = walls;
    kv["goal"] = std::to_string(c.env.goal.x) + ":" + std::to_string(c.env.goal.y);
    std::string starts;
    for (const auto& s : c.env.start_distribution) {
        starts += (starts.empty() ? "" : ",") + std::to_string(s.cell.x) + ":" + std::to_string(s.cell.y) + ":" +
                  format_real(s.probability);
    }
    kv["starts"] = starts;
    kv["step_penalty"] = format_real(c.env.step_penalty);
    kv["goal_reward"] = format_real(c.env.goal_reward);
    kv["horizon"] = std::to_string(c.env.horizon);
    kv["discount"] = format_real(c.env.discount);
    kv["slip_probability"] = format_real(c.env.slip_probability);
    return kv;
}

}  // namespace hashreward::harness
