#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <deque>
#include <set>
#include <sstream>

#include "hashreward/env/demonstrations.hpp"
#include "hashreward/env/gridworld.hpp"
#include "hashreward/errors.hpp"

using namespace hashreward;
using namespace hashreward::env;

namespace {

GridworldSpec open_grid(int size, Cell goal, Cell start) {
    GridworldSpec spec;
    spec.grid_size = size;
    spec.cell_pixels = 2;
    spec.goal = goal;
    spec.start_distribution = {{start, 1.0}};
    spec.slip_probability = 0.0;
    return spec;
}

float pixel(const GridworldSpec& spec, const PixelState& s, Cell c, int dx = 0, int dy = 0) {
    const int px = c.x * spec.cell_pixels + dx;
    const int py = c.y * spec.cell_pixels + dy;
    return s.intensities[static_cast<std::size_t>(py * s.width + px)];
}

// Breadth-first shortest path lengths to the goal over open cells.
std::vector<int> bfs_distances(const GridworldSpec& spec) {
    std::vector<int> dist(spec.cell_count(), -1);
    std::deque<Cell> frontier{spec.goal};
    dist[spec.cell_index(spec.goal)] = 0;
    while (!frontier.empty()) {
        const Cell c = frontier.front();
        frontier.pop_front();
        const Cell next[] = {{c.x, c.y - 1}, {c.x, c.y + 1}, {c.x - 1, c.y}, {c.x + 1, c.y}};
        for (const Cell n : next) {
            if (!spec.in_bounds(n) || spec.is_wall(n) || dist[spec.cell_index(n)] >= 0) continue;
            dist[spec.cell_index(n)] = dist[spec.cell_index(c)] + 1;
            frontier.push_back(n);
        }
    }
    return dist;
}

}  // namespace

TEST_CASE("standard map is valid") {
    const auto spec = GridworldSpec::standard();
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.pixel_side() == 32);
    CHECK(spec.horizon == 64);
    CHECK(spec.discount == 0.99);
    CHECK(spec.slip_probability == 0.1);
    auto bad = spec;
    bad.walls.push_back(spec.goal);
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = spec;
    bad.start_distribution[0].probability = 0.5;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = spec;
    bad.horizon = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("rendering contract") {
    const auto spec = GridworldSpec::standard();
    const auto s = render(spec, Cell{0, 0});
    CHECK(s.width == 32);
    CHECK(s.height == 32);
    CHECK(pixel(spec, s, {0, 0}) == 1.0F);
    CHECK(pixel(spec, s, {0, 0}, 3, 3) == 1.0F);
    CHECK(pixel(spec, s, {1, 0}) == 0.0F);
    CHECK(pixel(spec, s, {7, 7}, 1, 2) == 0.6F);
    CHECK(pixel(spec, s, {1, 3}) == 0.3F);
    // The agent is drawn over the goal.
    CHECK(pixel(spec, render(spec, spec.goal), spec.goal) == 1.0F);

    std::set<std::vector<float>> images;
    for (int y = 0; y < spec.grid_size; ++y) {
        for (int x = 0; x < spec.grid_size; ++x) images.insert(render(spec, {x, y}).intensities);
    }
    CHECK(images.size() == spec.cell_count());
}

TEST_CASE("reset draws from the start distribution") {
    auto single = open_grid(4, {3, 3}, {1, 2});
    auto rng = make_rng(1);
    for (int i = 0; i < 100; ++i) CHECK(reset(single, rng).state.cell == Cell{1, 2});

    auto two = single;
    two.start_distribution = {{{0, 0}, 0.5}, {{2, 1}, 0.5}};
    int first = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto r = reset(two, rng);
        CHECK(r.state.elapsed == 0);
        if (r.state.cell == Cell{0, 0}) ++first;
    }
    CHECK(std::abs(first / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("deterministic moves, walls and rewards") {
    auto spec = open_grid(4, {3, 3}, {0, 0});
    spec.walls = {{2, 1}};
    auto rng = make_rng(0);
    const GridState s{{1, 1}, 0};
    auto r = step(spec, s, 3, rng);
    CHECK(r.state.cell == Cell{1, 1});  // wall at (2,1)
    CHECK(r.reward == spec.step_penalty);
    CHECK_FALSE(r.done);
    r = step(spec, s, 1, rng);
    CHECK(r.state.cell == Cell{1, 2});
    r = step(spec, GridState{{0, 0}, 0}, 0, rng);
    CHECK(r.state.cell == Cell{0, 0});  // border
    r = step(spec, GridState{{2, 3}, 5}, 3, rng);
    CHECK(r.state.cell == Cell{3, 3});
    CHECK(r.reward == spec.goal_reward);
    CHECK(r.done);
    CHECK(r.reached_goal);
    r = step(spec, GridState{{0, 0}, spec.horizon - 1}, 3, rng);
    CHECK(r.done);
    CHECK_FALSE(r.reached_goal);
    CHECK_THROWS_AS(step(spec, s, 4, rng), InputError);
    CHECK_THROWS_AS(step(spec, s, -1, rng), InputError);
}

TEST_CASE("slip frequency") {
    auto spec = open_grid(5, {4, 4}, {2, 2});
    spec.slip_probability = 0.3;
    auto rng = make_rng(17);
    int intended = 0;
    std::array<int, 4> other{};
    for (int i = 0; i < 10000; ++i) {
        const auto r = step(spec, GridState{{2, 2}, 0}, 3, rng);
        if (r.state.cell == Cell{3, 2}) ++intended;
        else if (r.state.cell == Cell{2, 1}) ++other[0];
        else if (r.state.cell == Cell{2, 3}) ++other[1];
        else if (r.state.cell == Cell{1, 2}) ++other[2];
    }
    CHECK(std::abs(intended / 10000.0 - 0.7) < 0.02);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(other[static_cast<std::size_t>(k)] / 10000.0 - 0.1) < 0.015);
}

TEST_CASE("value iteration on a two-cell chain") {
    GridworldSpec spec;
    spec.grid_size = 2;
    spec.cell_pixels = 1;
    spec.walls = {{0, 1}, {1, 1}};
    spec.goal = {1, 0};
    spec.start_distribution = {{{0, 0}, 1.0}};
    spec.step_penalty = 0.0;
    spec.goal_reward = 1.0;
    spec.discount = 0.9;
    spec.slip_probability = 0.0;
    const auto expert = value_iteration_expert(spec, 1e-12);
    const auto& q = expert.q[spec.cell_index({0, 0})];
    CHECK(q[3] == doctest::Approx(1.0).epsilon(1e-12));
    // Any other action stays put and can reach the goal one step later: 0.9 * 1.
    CHECK(q[0] == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(expert.act(spec, {0, 0}) == 3);
    CHECK(expert.residual < 1e-12);
}

TEST_CASE("greedy expert follows shortest paths") {
    for (const bool with_walls : {false, true}) {
        auto spec = open_grid(5, {4, 4}, {0, 0});
        spec.step_penalty = -0.01;
        if (with_walls) spec.walls = {{1, 1}, {2, 1}, {3, 1}, {3, 2}, {3, 3}};
        const auto expert = value_iteration_expert(spec, 1e-10);
        const auto dist = bfs_distances(spec);
        auto rng = make_rng(0);
        for (std::size_t i = 0; i < spec.cell_count(); ++i) {
            const Cell c = spec.cell_at(i);
            if (spec.is_wall(c) || c == spec.goal) continue;
            GridState s{c, 0};
            int steps = 0;
            while (s.cell != spec.goal && steps < 50) {
                s = step(spec, s, expert.act(spec, s.cell), rng).state;
                ++steps;
            }
            CAPTURE(c.x);
            CAPTURE(c.y);
            CHECK(steps == dist[i]);
            if (!with_walls) CHECK(steps == std::abs(4 - c.x) + std::abs(4 - c.y));
        }
    }
}

TEST_CASE("finite-horizon value iteration for an undiscounted map") {
    auto spec = open_grid(3, {2, 2}, {0, 0});
    spec.discount = 1.0;
    spec.horizon = 10;
    spec.step_penalty = -0.1;
    const auto expert = value_iteration_expert(spec, 1e-9);
    CHECK(expert.sweeps == 10);
    // Four steps: three penalties then the goal.
    CHECK(expert.value(spec, {0, 0}) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("expert return matches its value on a deterministic map") {
    auto spec = GridworldSpec::standard();
    spec.slip_probability = 0.0;
    const auto expert = value_iteration_expert(spec, 1e-12);
    const auto policy = expert_policy(spec, expert);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = rollout(spec, policy, seed, true);
        const Cell start = [&] {
            for (int y = 0; y < spec.grid_size; ++y) {
                for (int x = 0; x < spec.grid_size; ++x) {
                    if (render(spec, {x, y}) == t.states.front()) return Cell{x, y};
                }
            }
            return Cell{-1, -1};
        }();
        CHECK(t.discounted_return(spec.discount) == doctest::Approx(expert.value(spec, start)).epsilon(1e-9));
    }
}

TEST_CASE("expert beats the uniform policy by more than three standard errors") {
    const auto spec = GridworldSpec::standard();
    const auto expert = value_iteration_expert(spec, 1e-10);
    const auto stats = [&](const PolicyFn& p) {
        double sum = 0.0;
        double sq = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto t = rollout(spec, p, seed, true);
            CHECK(static_cast<int>(t.size()) <= spec.horizon);
            sum += t.total_return();
            sq += t.total_return() * t.total_return();
        }
        const double mean = sum / 100.0;
        return std::pair{mean, std::sqrt((sq / 100.0 - mean * mean) / 100.0)};
    };
    const auto [e_mean, e_se] = stats(expert_policy(spec, expert));
    const auto [r_mean, r_se] = stats(uniform_policy());
    CHECK(e_mean - r_mean > 3.0 * std::sqrt(e_se * e_se + r_se * r_se));
}

TEST_CASE("rollouts are reproducible") {
    const auto spec = GridworldSpec::standard();
    const auto a = rollout(spec, uniform_policy(), 99, true);
    const auto b = rollout(spec, uniform_policy(), 99, true);
    CHECK(a == b);
    CHECK(a.states.size() == a.actions.size());
    CHECK(a.true_rewards.size() == a.actions.size());
    CHECK(rollout(spec, uniform_policy(), 99, false).true_rewards.empty());
}

TEST_CASE("demonstration files round-trip and check compatibility") {
    const auto spec = GridworldSpec::standard();
    const auto expert = value_iteration_expert(spec, 1e-10);
    const auto one = collect_demonstrations(spec, expert_policy(spec, expert), 1, 5, DemoSource::expert);
    CHECK(one.trajectories.size() == 1);
    CHECK(one.trajectories[0].seed == 5);

    const auto demos = collect_demonstrations(spec, uniform_policy(), 4, 10, DemoSource::random);
    std::stringstream buffer;
    write_demonstrations(buffer, demos, spec);
    std::string header;
    std::getline(std::stringstream(buffer.str()), header);
    CHECK(header.find("\"format\":\"hashreward-demos\"") != std::string::npos);
    CHECK(header.find("\"width\":32") != std::string::npos);
    const auto back = read_demonstrations(buffer, &spec);
    CHECK(back == demos);
    CHECK(back.source == DemoSource::random);

    auto other = spec;
    other.slip_probability = 0.2;
    std::stringstream again(buffer.str());
    CHECK_THROWS_AS(read_demonstrations(again, &other), FormatError);
    std::stringstream junk("{\"format\":\"something\"}\n");
    CHECK_THROWS_AS(read_demonstrations(junk), FormatError);
    CHECK_THROWS_AS(load_demonstrations("/nonexistent/demos.jsonl"), FormatError);
}
