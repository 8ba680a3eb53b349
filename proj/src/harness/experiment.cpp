#include "hashreward/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "hashreward/errors.hpp"

namespace hashreward::harness {

namespace fs = std::filesystem;
using nn::Matrix;

namespace {

// Action paired with the absorbing observation; the head has no "no-op" input.
constexpr int kAbsorbingAction = 0;

std::string number(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.10g", v);
    return buffer;
}

double mean_of(std::span<const double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::ofstream open_text(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    return out;
}

// Every (state, action) pair of the demonstrations as matrix rows.
struct SamplePool {
    Matrix states;
    std::vector<int> actions;
};

SamplePool pool_of(std::span<const env::DemonstrationSet* const> sets) {
    std::vector<env::PixelState> states;
    SamplePool pool;
    for (const auto* set : sets) {
        for (const auto& t : set->trajectories) {
            states.insert(states.end(), t.states.begin(), t.states.end());
            pool.actions.insert(pool.actions.end(), t.actions.begin(), t.actions.end());
        }
    }
    pool.states = reward::to_matrix(states);
    return pool;
}

Matrix states_of_rollouts(const env::GridworldSpec& spec, const env::PolicyFn& policy, std::size_t count,
                          std::uint64_t seed) {
    std::vector<env::PixelState> states;
    for (std::uint64_t k = 0; states.size() < count; ++k) {
        const auto t = env::rollout(spec, policy, seed + k, false);
        for (const auto& s : t.states) {
            if (states.size() == count) break;
            states.push_back(s);
        }
    }
    return reward::to_matrix(states);
}

void write_checkpoint(const fs::path& dir, const std::string& tag, const policy::PolicyNetwork& policy,
                      const reward::RewardModel& model) {
    fs::create_directories(dir);
    policy::save_policy(dir / (tag + "_policy.bin"), policy);
    reward::save_reward_model(dir / (tag + "_reward.bin"), model);
}

void write_config(const fs::path& path, const ExperimentConfig& config, std::uint64_t seed) {
    auto out = open_text(path);
    auto values = to_key_values(config);
    values["seeds"] = std::to_string(seed);
    for (const auto& [k, v] : values) out << k << " = " << v << '\n';
}

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double average = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = average;
        i = j + 1;
    }
    return r;
}

}  // namespace

std::string format_metrics_row(const MetricsRow& row) {
    std::ostringstream out;
    out << row.env_step << ',' << number(row.true_return) << ',' << number(row.pr_agent) << ',' << number(row.pr_expert)
        << ',' << number(row.loss_h) << ',' << number(row.loss_d) << ',' << number(row.d_expert) << ','
        << number(row.d_agent) << ',' << number(row.entropy) << ',' << number(row.seconds);
    return out.str();
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open metrics file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError(path.string() + ": unexpected metrics header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream fields(line);
        std::string cell;
        while (std::getline(fields, cell, ',')) cells.push_back(cell);
        if (cells.size() != 10) throw FormatError(path.string() + ": metrics row needs 10 columns");
        try {
            MetricsRow r;
            r.env_step = static_cast<std::size_t>(std::stoull(cells[0]));
            r.true_return = std::stod(cells[1]);
            r.pr_agent = std::stod(cells[2]);
            r.pr_expert = std::stod(cells[3]);
            r.loss_h = std::stod(cells[4]);
            r.loss_d = std::stod(cells[5]);
            r.d_expert = std::stod(cells[6]);
            r.d_agent = std::stod(cells[7]);
            r.entropy = std::stod(cells[8]);
            r.seconds = std::stod(cells[9]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw FormatError(path.string() + ": malformed metrics row '" + line + "'");
        }
    }
    return rows;
}

EvalResult evaluate(const env::PolicyFn& policy, const env::GridworldSpec& spec, std::size_t episodes,
                    std::uint64_t seed) {
    if (episodes < 1) throw InputError("evaluation needs at least one episode");
    EvalResult result;
    for (std::size_t e = 0; e < episodes; ++e) {
        result.returns.push_back(env::rollout(spec, policy, seed + e, true).total_return());
    }
    result.mean = mean_of(result.returns);
    double var = 0.0;
    for (double r : result.returns) var += (r - result.mean) * (r - result.mean);
    result.stddev = std::sqrt(var / static_cast<double>(episodes));
    return result;
}

EvalResult evaluate(const policy::PolicyNetwork& policy, const env::GridworldSpec& spec, std::size_t episodes,
                    std::uint64_t seed) {
    return evaluate(policy::as_policy_fn(policy, true), spec, episodes, seed);
}

PretrainReport pretrain_autoencoder(reward::RewardModel& model, const env::DemonstrationSet& expert_demos,
                                    const env::DemonstrationSet& random_demos, std::size_t updates,
                                    std::size_t batch_size, double learning_rate, Rng& rng) {
    expert_demos.validate();
    random_demos.validate();
    PretrainReport report;
    if (!model.mask.use_reconstruction) return report;
    if (batch_size < 1) throw InputError("pretraining batch size must be >= 1");
    const env::DemonstrationSet* sets[] = {&expert_demos, &random_demos};
    const auto pool = pool_of(sets);
    report.initial_mse = reward::reconstruction_mse(model, pool.states);

    auto params = model.encoder.parameters();
    const auto decoder_params = model.decoder.parameters();
    params.insert(params.end(), decoder_params.begin(), decoder_params.end());
    auto adam = nn::AdamState::for_parameters(params);
    const auto n = static_cast<std::uint64_t>(pool.states.rows());
    Matrix batch(static_cast<Eigen::Index>(batch_size), pool.states.cols());
    for (std::size_t u = 0; u < updates; ++u) {
        for (std::size_t r = 0; r < batch_size; ++r) {
            batch.row(static_cast<Eigen::Index>(r)) = pool.states.row(static_cast<Eigen::Index>(uniform_index(rng, n)));
        }
        const auto loss = reward::autoencoder_loss(model, batch);
        if (!std::isfinite(loss.loss)) throw NumericError("autoencoder pretraining loss is not finite");
        auto grads = loss.encoder_gradients.views();
        const auto decoder_grads = loss.decoder_gradients.views();
        grads.insert(grads.end(), decoder_grads.begin(), decoder_grads.end());
        nn::adam_step(params, grads, adam, nn::linear_decay(learning_rate, u, updates));
    }
    report.updates = updates;
    report.final_mse = reward::reconstruction_mse(model, pool.states);
    return report;
}

TrialResult run_trial(const ExperimentConfig& config, std::uint64_t seed, const env::DemonstrationSet& expert_demos,
                      const env::DemonstrationSet& random_demos) {
    config.validate();
    expert_demos.validate();
    random_demos.validate();
    const auto& spec = config.env;
    TrialResult result;
    result.seed = seed;
    result.run_dir = config.output_dir / std::string(reward::to_string(config.variant)) / ("seed_" + std::to_string(seed));
    fs::create_directories(result.run_dir);
    const auto checkpoint_dir = result.run_dir / "checkpoints";
    write_config(result.run_dir / "config.txt", config, seed);

    reward::RewardModelConfig model_config;
    model_config.pixel_count = spec.pixel_count();
    model_config.code_length = config.code_length;
    model_config.lambda = config.lambda;
    model_config.encoder_hidden = config.encoder_hidden;
    model_config.head_hidden = config.head_hidden;
    policy::PolicyConfig policy_config;
    policy_config.pixel_count = spec.pixel_count();
    policy_config.hidden = config.policy_hidden;

    auto model_rng = make_rng(seed, 1);
    auto policy_rng = make_rng(seed, 2);
    auto ppo_rng = make_rng(seed, 3);
    auto reward_rng = make_rng(seed, 4);
    auto pretrain_rng = make_rng(seed, 5);
    auto model = reward::RewardModel::create(model_config, config.variant, model_rng);
    auto policy = policy::PolicyNetwork::create(policy_config, policy_rng);
    const auto initial_policy = policy;

    const auto clock_start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    };
    result.pretrain = pretrain_autoencoder(model, expert_demos, random_demos, config.pretrain_updates,
                                           config.pretrain_batch, config.reward_learning_rate, pretrain_rng);

    const env::DemonstrationSet* expert_set[] = {&expert_demos};
    const auto expert = pool_of(expert_set);
    // Scored-only expert rows plus, when enabled, one absorbing row per demonstration that reached the goal.
    auto expert_training = expert;
    const auto absorbing = reward::to_vector(env::render(spec, spec.goal));
    if (config.absorbing_terminal) {
        for (const auto& t : expert_demos.trajectories) {
            const bool reached = t.true_rewards.empty() ? static_cast<int>(t.size()) < spec.horizon
                                                        : t.true_rewards.back() == spec.goal_reward;
            if (!reached) continue;
            expert_training.states.conservativeResize(expert_training.states.rows() + 1, Eigen::NoChange);
            expert_training.states.row(expert_training.states.rows() - 1) = absorbing.transpose();
            expert_training.actions.push_back(kAbsorbingAction);
        }
    }
    const auto expert_count = static_cast<std::uint64_t>(expert_training.states.rows());
    Matrix absorbing_row(1, absorbing.size());
    absorbing_row.row(0) = absorbing.transpose();
    const int absorbing_action[] = {kAbsorbingAction};

    const auto iterations = config.iterations();
    policy::PpoTrainer ppo(policy, config.ppo, iterations * config.learner_ratio);
    reward::RewardTrainer reward_trainer(model, config.reward_learning_rate, iterations * config.reward_updates_per_phase);
    policy::EnvRunner runner(spec, seed);

    auto metrics = open_text(result.run_dir / "metrics.csv");
    metrics << kMetricsHeader << '\n';
    auto evals = open_text(result.run_dir / "eval.csv");
    evals << "env_step,mean_return,std_return\n";
    auto timing = open_text(result.run_dir / "timing.csv");
    timing << "env_step,seconds\n";

    std::size_t env_step = 0;
    try {
        for (std::size_t it = 1; it <= iterations; ++it) {
            MetricsRow row;
            std::vector<double> episode_returns;
            std::vector<double> learner_d;
            double entropy = 0.0;
            for (std::size_t phase = 0; phase < config.learner_ratio; ++phase) {
                auto batch = runner.collect(policy, config.steps_per_iter);
                env_step += batch.size();
                if (phase == 0) {
                    // Reward-model phase on a mixed minibatch of the fresh rollout and the demonstrations.
                    double loss_h = 0.0;
                    double loss_d = 0.0;
                    std::size_t goal_entries = 0;
                    if (config.absorbing_terminal) {
                        goal_entries = static_cast<std::size_t>(std::count(batch.reached_goal.begin(), batch.reached_goal.end(), 1));
                    }
                    const auto learner_count = static_cast<std::uint64_t>(batch.size() + goal_entries);
                    for (std::size_t u = 0; u < config.reward_updates_per_phase; ++u) {
                        reward::SampleBatch mixed;
                        const auto total = config.reward_batch_learner + config.reward_batch_expert;
                        mixed.states.resize(static_cast<Eigen::Index>(total), expert.states.cols());
                        for (std::size_t r = 0; r < config.reward_batch_learner; ++r) {
                            const auto i = uniform_index(reward_rng, learner_count);
                            if (i < batch.size()) {
                                mixed.states.row(static_cast<Eigen::Index>(r)) = batch.states.row(static_cast<Eigen::Index>(i));
                                mixed.actions.push_back(batch.actions[i]);
                            } else {
                                mixed.states.row(static_cast<Eigen::Index>(r)) = absorbing.transpose();
                                mixed.actions.push_back(kAbsorbingAction);
                            }
                            mixed.labels.push_back(0);
                        }
                        for (std::size_t r = 0; r < config.reward_batch_expert; ++r) {
                            const auto i = uniform_index(reward_rng, expert_count);
                            mixed.states.row(static_cast<Eigen::Index>(config.reward_batch_learner + r)) =
                                expert_training.states.row(static_cast<Eigen::Index>(i));
                            mixed.actions.push_back(expert_training.actions[i]);
                            mixed.labels.push_back(1);
                        }
                        const auto loss = reward_trainer.update(model, mixed, reward_rng);
                        loss_h += loss.hashing;
                        loss_d += loss.discriminator;
                    }
                    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(config.reward_updates_per_phase, 1));
                    row.loss_h = loss_h * inv;
                    row.loss_d = loss_d * inv;
                }
                const auto d = reward::discriminate(model, batch.states, batch.actions);
                learner_d.insert(learner_d.end(), d.begin(), d.end());
                batch.rewards.resize(d.size());
                std::transform(d.begin(), d.end(), batch.rewards.begin(), reward::pseudo_reward_from_probability);
                if (config.absorbing_terminal) {
                    const double absorbing_value =
                        reward::pseudo_rewards(model, absorbing_row, absorbing_action)[0] / (1.0 - config.ppo.gamma);
                    batch.terminal_values.resize(batch.size());
                    for (std::size_t t = 0; t < batch.size(); ++t) {
                        batch.terminal_values[t] = batch.reached_goal[t] ? absorbing_value : batch.truncation_values[t];
                    }
                }
                auto adv = policy::compute_advantages(batch, config.ppo.gamma, config.ppo.gae_lambda);
                batch.advantages = std::move(adv.advantages);
                batch.returns = std::move(adv.returns);
                entropy += ppo.ppo_update(policy, batch, ppo_rng).entropy;
                episode_returns.insert(episode_returns.end(), batch.episode_returns.begin(), batch.episode_returns.end());
            }
            const auto expert_d = reward::discriminate(model, expert.states, expert.actions);
            std::vector<double> learner_pr(learner_d.size());
            std::vector<double> expert_pr(expert_d.size());
            std::transform(learner_d.begin(), learner_d.end(), learner_pr.begin(), reward::pseudo_reward_from_probability);
            std::transform(expert_d.begin(), expert_d.end(), expert_pr.begin(), reward::pseudo_reward_from_probability);

            row.env_step = env_step;
            row.true_return = mean_of(episode_returns);
            row.pr_agent = mean_of(learner_pr);
            row.pr_expert = mean_of(expert_pr);
            row.d_agent = mean_of(learner_d);
            row.d_expert = mean_of(expert_d);
            row.entropy = entropy / static_cast<double>(config.learner_ratio);
            const double seconds = elapsed();
            row.seconds = config.record_wall_clock ? seconds : 0.0;
            metrics << format_metrics_row(row) << '\n' << std::flush;
            timing << env_step << ',' << number(seconds) << '\n' << std::flush;
            result.metrics.push_back(row);

            if (it % config.eval_interval == 0 || it == iterations) {
                const auto e = evaluate(policy, spec, config.eval_episodes, config.eval_seed);
                evals << env_step << ',' << number(e.mean) << ',' << number(e.stddev) << '\n' << std::flush;
                result.evals.push_back({env_step, e.mean, e.stddev});
                result.final_eval = e;
            }
            if (config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0) {
                char tag[32];
                std::snprintf(tag, sizeof(tag), "iter_%04zu", it);
                write_checkpoint(checkpoint_dir, tag, policy, model);
            }
        }
    } catch (const NumericError&) {
        write_checkpoint(checkpoint_dir, "abort", policy, model);
        throw;
    }
    write_checkpoint(checkpoint_dir, "final", policy, model);

    const auto expert_solution = env::value_iteration_expert(spec, 1e-10);
    reward::CodeGroup groups[] = {
        {"initial_policy", states_of_rollouts(spec, policy::as_policy_fn(initial_policy, false), config.code_samples,
                                              config.code_rollout_seed)},
        {"final_policy",
         states_of_rollouts(spec, policy::as_policy_fn(policy, false), config.code_samples, config.code_rollout_seed)},
        {"expert", states_of_rollouts(spec, env::expert_policy(spec, expert_solution), config.code_samples,
                                      config.code_rollout_seed)},
    };
    result.codes = reward::export_codes(model, groups);
    reward::write_code_export(result.run_dir / "codes", result.codes);
    return result;
}

std::vector<TrialResult> run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.expert_demos.empty()) throw ConfigurationError("expert_demos is not set");
    if (!fs::exists(config.expert_demos)) {
        throw ConfigurationError("expert demonstration file " + config.expert_demos.string() + " does not exist");
    }
    auto expert = env::load_demonstrations(config.expert_demos, &config.env);
    if (expert.trajectories.size() < config.demo_count) {
        throw InputError("expert demonstration file holds " + std::to_string(expert.trajectories.size()) +
                         " trajectories, demo_count asks for " + std::to_string(config.demo_count));
    }
    expert.trajectories.resize(config.demo_count);

    env::DemonstrationSet random;
    if (config.random_demos.empty()) {
        random = env::collect_demonstrations(config.env, env::uniform_policy(), config.demo_count,
                                             config.random_demo_seed, env::DemoSource::random);
    } else {
        if (!fs::exists(config.random_demos)) {
            throw ConfigurationError("random demonstration file " + config.random_demos.string() + " does not exist");
        }
        random = env::load_demonstrations(config.random_demos, &config.env);
    }

    std::vector<TrialResult> trials;
    for (auto seed : config.seeds) trials.push_back(run_trial(config, seed, expert, random));
    return trials;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("spearman needs sequences of equal length");
    if (x.size() < 2) throw InputError("spearman needs at least two points");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InputError("spearman inputs must be finite");
    }
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mx = mean_of(rx);
    const double my = mean_of(ry);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw InputError("spearman is undefined for a constant sequence");
    return sxy / std::sqrt(sxx * syy);
}

double reward_correlation_report(std::span<const MetricsRow> metrics) {
    if (metrics.size() < 10) {
        throw InputError("reward correlation needs >= 10 metrics rows, got " + std::to_string(metrics.size()));
    }
    std::vector<double> pr;
    std::vector<double> ret;
    for (const auto& m : metrics) {
        if (!std::isfinite(m.true_return)) continue;
        pr.push_back(m.pr_agent);
        ret.push_back(m.true_return);
    }
    return spearman(pr, ret);
}

}  // namespace hashreward::harness
