#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace hashreward {

// Flat "key = value" text; '#' starts a comment, blank lines are ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);

double parse_real(const std::string& key, const std::string& value);
long long parse_integer(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

}  // namespace hashreward
