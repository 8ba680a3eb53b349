#include "hashreward/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "hashreward/errors.hpp"

namespace hashreward::nn {

namespace io {

void write_u32(std::ostream& out, std::uint32_t value) {
    const char bytes[4] = {static_cast<char>(value & 0xFF), static_cast<char>((value >> 8) & 0xFF),
                           static_cast<char>((value >> 16) & 0xFF), static_cast<char>((value >> 24) & 0xFF)};
    out.write(bytes, 4);
}

void write_u8(std::ostream& out, std::uint8_t value) {
    out.put(static_cast<char>(value));
}

void write_f32(std::ostream& out, float value) {
    write_u32(out, std::bit_cast<std::uint32_t>(value));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw FormatError("unexpected end of file");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::uint8_t read_u8(std::istream& in) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("unexpected end of file");
    return static_cast<std::uint8_t>(c);
}

float read_f32(std::istream& in) {
    return std::bit_cast<float>(read_u32(in));
}

void write_magic(std::ostream& out, const char (&magic)[5]) {
    out.write(magic, 4);
}

void expect_magic(std::istream& in, const char (&magic)[5]) {
    char found[4];
    if (!in.read(found, 4) || std::memcmp(found, magic, 4) != 0) {
        throw FormatError(std::string("bad magic bytes, expected \"") + magic + "\"");
    }
}

}  // namespace io

void write_net(std::ostream& out, const DenseNet& net) {
    io::write_magic(out, "HRNN");
    io::write_u32(out, kCheckpointVersion);
    io::write_u32(out, static_cast<std::uint32_t>(net.layer_count()));
    for (const auto& layer : net.layers()) {
        io::write_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
        io::write_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
        io::write_u8(out, static_cast<std::uint8_t>(layer.activation));
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) io::write_f32(out, static_cast<float>(layer.weight.data()[i]));
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) io::write_f32(out, static_cast<float>(layer.bias[i]));
    }
    if (!out) throw FormatError("failed writing network checkpoint");
}

DenseNet read_net(std::istream& in) {
    io::expect_magic(in, "HRNN");
    const auto version = io::read_u32(in);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported network checkpoint version " + std::to_string(version));
    }
    const auto count = io::read_u32(in);
    std::vector<DenseLayer> layers(count);
    for (auto& layer : layers) {
        const auto rows = io::read_u32(in);
        const auto cols = io::read_u32(in);
        layer.activation = activation_from_tag(io::read_u8(in));
        layer.weight.resize(rows, cols);
        layer.bias.resize(rows);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = io::read_f32(in);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = io::read_f32(in);
    }
    return DenseNet(std::move(layers));
}

void save_net(const std::filesystem::path& path, const DenseNet& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    write_net(out, net);
}

DenseNet load_net(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_net(in);
}

}  // namespace hashreward::nn
