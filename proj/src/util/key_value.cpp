#include "hashreward/util/key_value.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "hashreward/errors.hpp"

namespace hashreward {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
    KeyValues values;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("line " + std::to_string(number) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw FormatError("line " + std::to_string(number) + ": empty key");
        values[key] = trim(line.substr(eq + 1));
    }
    return values;
}

KeyValues load_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return parse_key_values(in);
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InputError("key '" + key + "': '" + value + "' is not a number");
    }
}

long long parse_integer(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end) throw InputError("key '" + key + "': '" + value + "' is not an integer");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw InputError("key '" + key + "': '" + value + "' is not a boolean");
}

}  // namespace hashreward
