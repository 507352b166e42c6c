#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "zsslr/errors.hpp"

namespace zsslr::kv {

/// One logical line of a manifest or run-config file: a keyword followed by
/// whitespace-separated arguments. '#' starts a comment, blank lines skipped.
struct Line {
    std::string key;
    std::vector<std::string> args;
    std::string tail;  // everything after the key, original spacing collapsed
    std::size_t line_no = 0;
};

inline std::vector<Line> parse_text(const std::string& text) {
    std::vector<Line> out;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        Line line;
        line.line_no = line_no;
        if (!(ls >> line.key)) continue;
        std::string tok;
        while (ls >> tok) line.args.push_back(tok);
        for (std::size_t i = 0; i < line.args.size(); ++i) {
            if (i) line.tail += ' ';
            line.tail += line.args[i];
        }
        out.push_back(std::move(line));
    }
    return out;
}

inline std::vector<Line> parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

template <class Int>
Int parse_int(const std::string& tok, const std::string& what) {
    Int value{};
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw config_error("bad integer for " + what + ": '" + tok + "'");
    return value;
}

inline double parse_double(const std::string& tok, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw config_error("bad number for " + what + ": '" + tok + "'");
    }
}

}  // namespace zsslr::kv
