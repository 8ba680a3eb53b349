#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "hashreward/nn/dense_net.hpp"

namespace hashreward::nn {

// "HRNN" | u32 version | u32 layer count | per layer:
//   u32 rows | u32 cols | u8 activation | rows*cols f32 weights (row-major) | rows f32 biases
// All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_net(std::ostream& out, const DenseNet& net);
DenseNet read_net(std::istream& in);

void save_net(const std::filesystem::path& path, const DenseNet& net);
DenseNet load_net(const std::filesystem::path& path);

namespace io {
void write_u32(std::ostream& out, std::uint32_t value);
void write_u8(std::ostream& out, std::uint8_t value);
void write_f32(std::ostream& out, float value);
std::uint32_t read_u32(std::istream& in);
std::uint8_t read_u8(std::istream& in);
float read_f32(std::istream& in);
void write_magic(std::ostream& out, const char (&magic)[5]);
void expect_magic(std::istream& in, const char (&magic)[5]);
}  // namespace io

}  // namespace hashreward::nn
