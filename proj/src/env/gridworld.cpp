#include "hashreward/env/gridworld.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "hashreward/errors.hpp"

namespace hashreward::env {

namespace {

constexpr std::array<Cell, kActionCount> kOffsets{Cell{0, -1}, Cell{0, 1}, Cell{-1, 0}, Cell{1, 0}};

std::string describe(Cell c) {
    return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
}

struct Fnv {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    void bytes(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    }
    void integer(long long v) { bytes(static_cast<std::uint64_t>(v)); }
    void real(double v) { bytes(std::bit_cast<std::uint64_t>(v)); }
};

}  // namespace

void GridworldSpec::validate() const {
    if (grid_size < 1) throw InputError("grid_size must be >= 1");
    if (cell_pixels < 1) throw InputError("cell_pixels must be >= 1");
    if (horizon < 1) throw InputError("horizon must be >= 1");
    if (!(discount > 0.0 && discount <= 1.0)) throw InputError("discount must lie in (0, 1]");
    if (!(slip_probability >= 0.0 && slip_probability < 1.0)) throw InputError("slip_probability must lie in [0, 1)");
    if (!in_bounds(goal)) throw InputError("goal " + describe(goal) + " is outside the grid");
    for (const auto& w : walls) {
        if (!in_bounds(w)) throw InputError("wall " + describe(w) + " is outside the grid");
    }
    if (is_wall(goal)) throw InputError("goal " + describe(goal) + " is a wall");
    if (start_distribution.empty()) throw InputError("start distribution is empty");
    double total = 0.0;
    for (const auto& s : start_distribution) {
        if (!in_bounds(s.cell) || is_wall(s.cell)) throw InputError("start cell " + describe(s.cell) + " is not an open cell");
        if (s.probability < 0.0) throw InputError("negative start probability");
        total += s.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("start probabilities sum to " + std::to_string(total) + ", not 1");
}

bool GridworldSpec::is_wall(Cell c) const {
    return std::find(walls.begin(), walls.end(), c) != walls.end();
}

std::uint64_t GridworldSpec::hash() const {
    Fnv f;
    f.integer(grid_size);
    f.integer(cell_pixels);
    f.integer(static_cast<long long>(walls.size()));
    for (const auto& w : walls) {
        f.integer(w.x);
        f.integer(w.y);
    }
    f.integer(goal.x);
    f.integer(goal.y);
    f.integer(static_cast<long long>(start_distribution.size()));
    for (const auto& s : start_distribution) {
        f.integer(s.cell.x);
        f.integer(s.cell.y);
        f.real(s.probability);
    }
    f.real(step_penalty);
    f.real(goal_reward);
    f.integer(horizon);
    f.real(discount);
    f.real(slip_probability);
    return f.h;
}

GridworldSpec GridworldSpec::standard() {
    GridworldSpec spec;
    spec.grid_size = 8;
    spec.cell_pixels = 4;
    // Horizontal barrier across row 3 and a stub hanging from the bottom edge at column 3.
    spec.walls = {{1, 3}, {2, 3}, {3, 3}, {4, 3}, {5, 3}, {3, 5}, {3, 6}, {3, 7}};
    spec.goal = {7, 7};
    spec.start_distribution = {{{0, 0}, 0.25}, {{7, 0}, 0.25}, {{0, 7}, 0.25}, {{2, 1}, 0.25}};
    spec.step_penalty = -0.01;
    spec.goal_reward = 1.0;
    spec.horizon = 64;
    spec.discount = 0.99;
    spec.slip_probability = 0.1;
    return spec;
}

PixelState render(const GridworldSpec& spec, Cell agent) {
    const int side = spec.pixel_side();
    PixelState image{side, side, std::vector<float>(spec.pixel_count(), 0.0F)};
    const auto paint = [&](Cell c, float value) {
        for (int py = c.y * spec.cell_pixels; py < (c.y + 1) * spec.cell_pixels; ++py) {
            for (int px = c.x * spec.cell_pixels; px < (c.x + 1) * spec.cell_pixels; ++px) {
                image.intensities[static_cast<std::size_t>(py) * static_cast<std::size_t>(side) + static_cast<std::size_t>(px)] = value;
            }
        }
    };
    for (const auto& w : spec.walls) paint(w, kWallIntensity);
    paint(spec.goal, kGoalIntensity);
    paint(agent, kAgentIntensity);
    return image;
}

ResetResult reset(const GridworldSpec& spec, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    Cell chosen = spec.start_distribution.back().cell;
    for (const auto& s : spec.start_distribution) {
        acc += s.probability;
        if (u < acc) {
            chosen = s.cell;
            break;
        }
    }
    return ResetResult{GridState{chosen, 0}, render(spec, chosen)};
}

Cell move(const GridworldSpec& spec, Cell cell, int direction) {
    const Cell next{cell.x + kOffsets[static_cast<std::size_t>(direction)].x,
                    cell.y + kOffsets[static_cast<std::size_t>(direction)].y};
    if (!spec.in_bounds(next) || spec.is_wall(next)) return cell;
    return next;
}

StepResult step(const GridworldSpec& spec, const GridState& state, int action, Rng& rng) {
    if (action < 0 || action >= kActionCount) throw InputError("invalid action index " + std::to_string(action));
    int direction = action;
    if (uniform01(rng) < spec.slip_probability) {
        // One of the other three directions, uniformly.
        const int k = static_cast<int>(uniform_index(rng, kActionCount - 1));
        direction = k < action ? k : k + 1;
    }
    StepResult result;
    result.state.cell = move(spec, state.cell, direction);
    result.state.elapsed = state.elapsed + 1;
    result.reached_goal = result.state.cell == spec.goal;
    result.reward = result.reached_goal ? spec.goal_reward : spec.step_penalty;
    result.done = result.reached_goal || result.state.elapsed >= spec.horizon;
    result.observation = render(spec, result.state.cell);
    return result;
}

double ExpertSolution::value(const GridworldSpec& spec, Cell c) const {
    const auto& row = q.at(spec.cell_index(c));
    return *std::max_element(row.begin(), row.end());
}

ExpertSolution value_iteration_expert(const GridworldSpec& spec, double tolerance) {
    spec.validate();
    if (!(tolerance > 0.0)) throw InputError("value iteration tolerance must be positive");
    const auto n = spec.cell_count();
    const double slip_each = spec.slip_probability / (kActionCount - 1);

    // successor[c][d]: deterministic result of moving in direction d.
    std::vector<std::array<std::size_t, kActionCount>> successor(n);
    std::vector<bool> active(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const Cell c = spec.cell_at(i);
        active[i] = !spec.is_wall(c) && c != spec.goal;
        for (int d = 0; d < kActionCount; ++d) successor[i][static_cast<std::size_t>(d)] = spec.cell_index(move(spec, c, d));
    }
    const auto goal_index = spec.cell_index(spec.goal);

    ExpertSolution solution;
    solution.q.assign(n, {0.0, 0.0, 0.0, 0.0});
    std::vector<double> value(n, 0.0);
    const auto backup = [&](std::size_t i, int a) {
        double total = 0.0;
        for (int d = 0; d < kActionCount; ++d) {
            const double p = d == a ? 1.0 - spec.slip_probability : slip_each;
            if (p == 0.0) continue;
            const auto next = successor[i][static_cast<std::size_t>(d)];
            const bool terminal = next == goal_index;
            const double r = terminal ? spec.goal_reward : spec.step_penalty;
            total += p * (r + (terminal ? 0.0 : spec.discount * value[next]));
        }
        return total;
    };

    const bool finite_horizon = spec.discount >= 1.0;
    const std::size_t max_sweeps = finite_horizon ? static_cast<std::size_t>(spec.horizon) : 1000000;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (int a = 0; a < kActionCount; ++a) {
                const double updated = backup(i, a);
                residual = std::max(residual, std::abs(updated - solution.q[i][static_cast<std::size_t>(a)]));
                solution.q[i][static_cast<std::size_t>(a)] = updated;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i]) value[i] = *std::max_element(solution.q[i].begin(), solution.q[i].end());
        }
        solution.residual = residual;
        solution.sweeps = sweep + 1;
        if (!finite_horizon && residual < tolerance) break;
    }
    if (!finite_horizon && solution.residual >= tolerance) {
        throw NumericError("value iteration did not converge, residual " + std::to_string(solution.residual));
    }

    solution.greedy_action.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = solution.q[i];
        const double best = *std::max_element(row.begin(), row.end());
        for (int a = 0; a < kActionCount; ++a) {
            if (row[static_cast<std::size_t>(a)] >= best - 1e-12) {
                solution.greedy_action[i] = a;
                break;
            }
        }
    }
    return solution;
}

double Trajectory::total_return() const {
    double total = 0.0;
    for (double r : true_rewards) total += r;
    return total;
}

double Trajectory::discounted_return(double discount) const {
    double total = 0.0;
    double weight = 1.0;
    for (double r : true_rewards) {
        total += weight * r;
        weight *= discount;
    }
    return total;
}

PolicyFn expert_policy(const GridworldSpec& spec, const ExpertSolution& expert) {
    return [spec, expert](Cell c, const PixelState&, Rng&) { return expert.act(spec, c); };
}

PolicyFn uniform_policy() {
    return [](Cell, const PixelState&, Rng& rng) { return static_cast<int>(uniform_index(rng, kActionCount)); };
}

Trajectory rollout(const GridworldSpec& spec, const PolicyFn& policy, std::uint64_t seed, bool record_true_reward) {
    Rng env_rng = make_rng(seed, 1);
    Rng policy_rng = make_rng(seed, 2);
    Trajectory trajectory;
    trajectory.seed = seed;
    auto [state, observation] = reset(spec, env_rng);
    for (int t = 0; t < spec.horizon; ++t) {
        const int action = policy(state.cell, observation, policy_rng);
        auto result = step(spec, state, action, env_rng);
        trajectory.states.push_back(std::move(observation));
        trajectory.actions.push_back(action);
        if (record_true_reward) trajectory.true_rewards.push_back(result.reward);
        state = result.state;
        observation = std::move(result.observation);
        if (result.done) break;
    }
    return trajectory;
}

}  // namespace hashreward::env
