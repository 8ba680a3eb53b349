#include "hashreward/env/demonstrations.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "hashreward/errors.hpp"
#include "hashreward/util/base64.hpp"

namespace hashreward::env {

namespace {

constexpr std::string_view kFormatName = "hashreward-demos";
constexpr int kFormatVersion = 1;

std::string hex64(std::uint64_t v) {
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(v));
    return buffer;
}

std::string encode_states(const std::vector<PixelState>& states) {
    std::vector<std::uint8_t> bytes;
    for (const auto& s : states) {
        for (float f : s.intensities) {
            const auto bits = std::bit_cast<std::uint32_t>(f);
            for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>((bits >> (8 * k)) & 0xFF));
        }
    }
    return base64_encode(bytes);
}

std::vector<PixelState> decode_states(std::string_view text, int width, int height, std::size_t count) {
    const auto bytes = base64_decode(text);
    const auto per_state = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() != count * per_state * 4) throw FormatError("state payload size does not match action count");
    std::vector<PixelState> states(count, PixelState{width, height, std::vector<float>(per_state)});
    std::size_t offset = 0;
    for (auto& s : states) {
        for (auto& f : s.intensities) {
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[offset + static_cast<std::size_t>(k)]) << (8 * k);
            f = std::bit_cast<float>(bits);
            offset += 4;
        }
    }
    return states;
}

}  // namespace

std::string_view to_string(DemoSource source) {
    switch (source) {
        case DemoSource::expert: return "expert";
        case DemoSource::random: return "random";
        case DemoSource::learner: return "learner";
    }
    return "unknown";
}

DemoSource demo_source_from_string(std::string_view name) {
    if (name == "expert") return DemoSource::expert;
    if (name == "random") return DemoSource::random;
    if (name == "learner") return DemoSource::learner;
    throw InputError("unknown demonstration source '" + std::string(name) + "'");
}

void DemonstrationSet::validate() const {
    if (trajectories.empty()) throw InputError("demonstration set is empty");
    const auto* first = &trajectories.front();
    if (first->states.empty()) throw InputError("demonstration trajectory has no states");
    const int w = first->states.front().width;
    const int h = first->states.front().height;
    for (const auto& t : trajectories) {
        if (t.states.size() != t.actions.size()) throw InputError("trajectory states/actions lengths differ");
        if (!t.true_rewards.empty() && t.true_rewards.size() != t.actions.size()) {
            throw InputError("trajectory rewards length differs from actions");
        }
        for (const auto& s : t.states) {
            if (s.width != w || s.height != h) throw InputError("demonstration pixel dimensions differ");
        }
        for (int a : t.actions) {
            if (a < 0 || a >= kActionCount) throw InputError("demonstration contains invalid action");
        }
    }
}

std::size_t DemonstrationSet::sample_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.size();
    return n;
}

DemonstrationSet collect_demonstrations(const GridworldSpec& spec, const PolicyFn& policy, std::size_t m,
                                        std::uint64_t base_seed, DemoSource source) {
    if (m < 1) throw InputError("demonstration count must be >= 1");
    DemonstrationSet demos;
    demos.source = source;
    for (std::size_t i = 0; i < m; ++i) demos.trajectories.push_back(rollout(spec, policy, base_seed + i, true));
    return demos;
}

void write_demonstrations(std::ostream& out, const DemonstrationSet& demos, const GridworldSpec& spec) {
    demos.validate();
    const auto& first = demos.trajectories.front().states.front();
    if (first.width != spec.pixel_side() || first.height != spec.pixel_side()) {
        throw InputError("demonstrations do not match the gridworld pixel size");
    }
    nlohmann::json header = {{"format", kFormatName},          {"version", kFormatVersion},
                             {"width", first.width},           {"height", first.height},
                             {"spec_hash", hex64(spec.hash())}, {"source", to_string(demos.source)},
                             {"count", demos.trajectories.size()}};
    out << header.dump() << '\n';
    for (const auto& t : demos.trajectories) {
        nlohmann::json record = {{"seed", t.seed},
                                 {"actions", t.actions},
                                 {"states", encode_states(t.states)},
                                 {"rewards", t.true_rewards}};
        out << record.dump() << '\n';
    }
    if (!out) throw FormatError("failed writing demonstrations");
}

void save_demonstrations(const std::filesystem::path& path, const DemonstrationSet& demos, const GridworldSpec& spec) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    write_demonstrations(out, demos, spec);
}

DemonstrationSet read_demonstrations(std::istream& in, const GridworldSpec* expected_spec) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("demonstration file is empty");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad demonstration header: ") + e.what());
    }
    if (header.value("format", "") != kFormatName) throw FormatError("not a demonstration file");
    if (header.value("version", 0) != kFormatVersion) throw FormatError("unsupported demonstration file version");
    const int width = header.at("width").get<int>();
    const int height = header.at("height").get<int>();
    if (expected_spec != nullptr) {
        if (width != expected_spec->pixel_side() || height != expected_spec->pixel_side()) {
            throw FormatError("demonstration pixel size does not match the gridworld");
        }
        if (header.at("spec_hash").get<std::string>() != hex64(expected_spec->hash())) {
            throw FormatError("demonstrations were recorded on a different gridworld (spec hash mismatch)");
        }
    }

    DemonstrationSet demos;
    demos.source = demo_source_from_string(header.at("source").get<std::string>());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto record = nlohmann::json::parse(line);
            Trajectory t;
            t.seed = record.at("seed").get<std::uint64_t>();
            t.actions = record.at("actions").get<std::vector<int>>();
            t.true_rewards = record.at("rewards").get<std::vector<double>>();
            t.states = decode_states(record.at("states").get<std::string>(), width, height, t.actions.size());
            demos.trajectories.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("bad demonstration record: ") + e.what());
        }
    }
    if (header.contains("count") && header.at("count").get<std::size_t>() != demos.trajectories.size()) {
        throw FormatError("demonstration file is truncated");
    }
    demos.validate();
    return demos;
}

DemonstrationSet load_demonstrations(const std::filesystem::path& path, const GridworldSpec* expected_spec) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open demonstration file " + path.string());
    return read_demonstrations(in, expected_spec);
}

}  // namespace hashreward::env
