#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "hashreward/env/gridworld.hpp"

namespace hashreward::env {

enum class DemoSource { expert, random, learner };

std::string_view to_string(DemoSource source);
DemoSource demo_source_from_string(std::string_view name);

struct DemonstrationSet {
    std::vector<Trajectory> trajectories;
    DemoSource source = DemoSource::expert;

    // Non-empty, one pixel size throughout.
    void validate() const;
    std::size_t sample_count() const;
    bool operator==(const DemonstrationSet&) const = default;
};

// m rollouts with seeds base_seed .. base_seed + m - 1.
DemonstrationSet collect_demonstrations(const GridworldSpec& spec, const PolicyFn& policy, std::size_t m,
                                        std::uint64_t base_seed, DemoSource source);

// Text format, one JSON record per line. Line 1 is the header
//   {"format":"hashreward-demos","version":1,"width":W,"height":H,"spec_hash":"<hex>","source":...,"count":N}
// followed by one line per trajectory
//   {"seed":S,"actions":[...],"states":"<base64 of little-endian f32 pixels>","rewards":[...]}
void write_demonstrations(std::ostream& out, const DemonstrationSet& demos, const GridworldSpec& spec);
void save_demonstrations(const std::filesystem::path& path, const DemonstrationSet& demos, const GridworldSpec& spec);

// When `expected_spec` is given, a spec-hash or pixel-size mismatch throws FormatError.
DemonstrationSet read_demonstrations(std::istream& in, const GridworldSpec* expected_spec = nullptr);
DemonstrationSet load_demonstrations(const std::filesystem::path& path, const GridworldSpec* expected_spec = nullptr);

}  // namespace hashreward::env
