#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semaug/error.hpp"

namespace semaug {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path);
}

/// Non-blank lines of a JSON Lines document, paired with 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string_view>> jsonl_lines(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string_view>> lines;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        lines.emplace_back(line_no, line);
    }
    return lines;
}

}  // namespace semaug
