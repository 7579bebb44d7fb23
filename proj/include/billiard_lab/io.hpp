#pragma once

// Machine-readable output and run plumbing shared by the CLI driver:
// CSV / JSON writers, flat key=value config files, run manifests, and a
// deterministic index-ordered parallel_for.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace billiard_lab {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal form with '.' separator, locale independent.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);  // '\n' endings on every platform
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
}

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

// Flat key=value config files; '#' starts a comment, blank lines ignored.
inline std::map<std::string, std::string> parse_config_text(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key=value, got '" + t + "'");
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config file not found: " + path);
    return parse_config_text(in);
}

// Effective worker count: explicit flag > 0, else BILLIARD_LAB_THREADS, else 1.
inline int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("BILLIARD_LAB_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// Runs fn(i) for i in [0, n); each index writes only its own output slot, so
// results are ordered by input index regardless of the thread count.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t nt = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t w = 0; w < nt; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline Json run_manifest(const std::string& subcommand,
                         const std::map<std::string, std::string>& config_echo,
                         double wall_seconds) {
    Json j;
    j["tool"] = "billiard_lab";
    j["version"] = "1.0.0";
    j["subcommand"] = subcommand;
    Json cfg;
    for (const auto& [k, v] : config_echo) cfg[k] = v;
    j["config"] = cfg;
    j["wall_time_s"] = wall_seconds;
    return j;
}

}  // namespace billiard_lab
