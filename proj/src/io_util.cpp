#include "vnn/io_util.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "vnn/error.hpp"

namespace vnn {

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename onto " + path.string());
    }
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            break;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string_view text) {
    const char* ws = " \t\r\n";
    std::size_t b = text.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    std::size_t e = text.find_last_not_of(ws);
    return std::string(text.substr(b, e - b + 1));
}

std::vector<double> parse_real_list(std::string_view text) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    for (const std::string& raw : split(text, ',')) {
        std::string token = trim(raw);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (token.empty() || ec != std::errc() || ptr != token.data() + token.size() ||
            !std::isfinite(v)) {
            throw ConfigError("invalid real '" + token + "' in list '" + std::string(text) + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace vnn
