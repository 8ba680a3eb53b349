#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hashreward/util/rng.hpp"

namespace hashreward::env {

inline constexpr int kActionCount = 4;
enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

// x = column, y = row (row 0 at the top of the rendered image).
struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

struct StartWeight {
    Cell cell;
    double probability = 1.0;
};

struct GridworldSpec {
    int grid_size = 8;
    int cell_pixels = 4;
    std::vector<Cell> walls;
    Cell goal{7, 7};
    std::vector<StartWeight> start_distribution{{Cell{0, 0}, 1.0}};
    double step_penalty = -0.01;
    double goal_reward = 1.0;
    int horizon = 64;
    double discount = 0.99;
    double slip_probability = 0.1;

    // Throws InputError naming the first violated invariant.
    void validate() const;

    int pixel_side() const { return grid_size * cell_pixels; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(pixel_side()) * static_cast<std::size_t>(pixel_side()); }
    std::size_t cell_count() const { return static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size); }
    std::size_t cell_index(Cell c) const { return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(grid_size) + static_cast<std::size_t>(c.x); }
    Cell cell_at(std::size_t index) const { return Cell{static_cast<int>(index % static_cast<std::size_t>(grid_size)), static_cast<int>(index / static_cast<std::size_t>(grid_size))}; }
    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < grid_size && c.y < grid_size; }
    bool is_wall(Cell c) const;

    // FNV-1a over a canonical encoding of every field; stamped into demonstration files.
    std::uint64_t hash() const;

    // 8x8 map with two wall segments, four start cells and the goal in the bottom-right corner.
    static GridworldSpec standard();
};

// Grayscale image, row-major, width == height == grid_size * cell_pixels.
// Agent 1.0, goal 0.6, walls 0.3, background 0.0; the agent is drawn last.
struct PixelState {
    int width = 0;
    int height = 0;
    std::vector<float> intensities;

    bool operator==(const PixelState&) const = default;
};

inline constexpr float kAgentIntensity = 1.0F;
inline constexpr float kGoalIntensity = 0.6F;
inline constexpr float kWallIntensity = 0.3F;

PixelState render(const GridworldSpec& spec, Cell agent);

// Agent position plus steps taken in the current episode.
struct GridState {
    Cell cell;
    int elapsed = 0;
};

struct ResetResult {
    GridState state;
    PixelState observation;
};

struct StepResult {
    GridState state;
    PixelState observation;
    double reward = 0.0;
    bool done = false;
    bool reached_goal = false;
};

ResetResult reset(const GridworldSpec& spec, Rng& rng);
StepResult step(const GridworldSpec& spec, const GridState& state, int action, Rng& rng);

// Deterministic successor of `cell` under `direction`, blocked by walls and borders.
Cell move(const GridworldSpec& spec, Cell cell, int direction);

struct ExpertSolution {
    std::vector<std::array<double, kActionCount>> q;  // indexed by cell_index; zero on walls and goal
    std::vector<int> greedy_action;                  // lowest index among maximal Q
    double residual = 0.0;
    std::size_t sweeps = 0;

    double value(const GridworldSpec& spec, Cell c) const;
    int act(const GridworldSpec& spec, Cell c) const { return greedy_action.at(spec.cell_index(c)); }
};

// Q-value iteration on the tabular MDP (goal absorbing, value 0 after entry).
// For discount < 1 iterates until the Bellman residual max-norm drops below tolerance;
// for discount == 1 runs `horizon` finite-horizon backups.
ExpertSolution value_iteration_expert(const GridworldSpec& spec, double tolerance);

struct Trajectory {
    std::vector<PixelState> states;
    std::vector<int> actions;
    std::vector<double> true_rewards;  // empty when not recorded
    std::uint64_t seed = 0;

    std::size_t size() const { return actions.size(); }
    double total_return() const;
    double discounted_return(double discount) const;
    bool operator==(const Trajectory&) const = default;
};

// Maps the true cell and its rendering to an action. Learned policies ignore the cell.
using PolicyFn = std::function<int(Cell, const PixelState&, Rng&)>;

PolicyFn expert_policy(const GridworldSpec& spec, const ExpertSolution& expert);
PolicyFn uniform_policy();

// One episode: environment and policy draw from separate streams derived from `seed`.
Trajectory rollout(const GridworldSpec& spec, const PolicyFn& policy, std::uint64_t seed, bool record_true_reward);

}  // namespace hashreward::env
