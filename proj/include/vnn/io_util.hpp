#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vnn {

// Write `contents` to a sibling temporary file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

// Parses "0.01,0.02" into reals; throws ConfigError on a malformed entry.
std::vector<double> parse_real_list(std::string_view text);

}  // namespace vnn
