#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Flat "key=value" text: one entry per line, '#' starts a comment, keys use
// dotted namespaces (model.embedding_dim=144).

namespace wmsr::kv {

class ParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Entries = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Splits "key=value"; throws on a missing '=' or empty key.
inline std::pair<std::string, std::string> split_assignment(const std::string& text, const std::string& where) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key=value, got '" + text + "'");
    std::string key = trim(text.substr(0, eq)), value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key in '" + text + "'");
    return {key, value};
}

inline Entries parse(const std::string& text, const std::string& source = "config") {
    Entries out;
    std::istringstream in(text);
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        out.push_back(split_assignment(line, source + ":" + std::to_string(lineno)));
    }
    return out;
}

inline Entries parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
}

inline std::string format(const Entries& e) {
    std::string out;
    for (const auto& [k, v] : e) out += k + "=" + v + "\n";
    return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ParseError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ParseError(key + ": expected a number, got '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ParseError(key + ": expected a boolean, got '" + v + "'");
}

/// Shortest text that parses back to the same double.
inline std::string from_double(double x) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

}  // namespace wmsr::kv
