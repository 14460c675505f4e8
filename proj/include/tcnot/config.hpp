#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcnot/io.hpp"

namespace tcnot {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key = value configuration. '#' starts a comment, blank lines are
// skipped, later assignments win. Unknown keys are rejected against the
// subcommand's key list so typos fail loudly instead of silently running
// with defaults.
class Config {
public:
    Config() = default;

    static Config from_string(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = io::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw UsageError("config line " + std::to_string(lineno) +
                                 ": expected key = value");
            const std::string key = io::trim(line.substr(0, eq));
            const std::string value = io::trim(line.substr(eq + 1));
            if (key.empty()) throw UsageError("config line " + std::to_string(lineno) +
                                              ": empty key");
            cfg.set(key, value);
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        return from_string(io::read_file(path));
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    long get_long(const std::string& key, long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_long(key, it->second);
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(key, it->second);
    }

    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        for (const auto& item : io::split_csv(it->second))
            out.push_back(parse_double(key, io::trim(item)));
        return out;
    }

    std::vector<int> get_ints(const std::string& key,
                              const std::vector<int>& fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<int> out;
        for (const auto& item : io::split_csv(it->second))
            out.push_back(int(parse_long(key, io::trim(item))));
        return out;
    }

    void require_known_keys(const std::set<std::string>& known) const {
        for (const auto& [key, value] : values_)
            if (!known.count(key)) throw UsageError("unknown config key: " + key);
    }

    // deterministic one-line rendering, embedded into output provenance
    std::string canonical() const {
        std::string out;
        for (const auto& [key, value] : values_) {
            if (!out.empty()) out += ";";
            out += key + "=" + value;
        }
        return out;
    }

    std::string content_hash() const { return io::hex64(io::fnv1a64(canonical())); }

private:
    static long parse_long(const std::string& key, const std::string& v) {
        std::size_t pos = 0;
        long out = 0;
        try {
            out = std::stol(v, &pos);
        } catch (...) {
            throw UsageError("config key " + key + ": not an integer: " + v);
        }
        if (pos != v.size())
            throw UsageError("config key " + key + ": not an integer: " + v);
        return out;
    }
    static double parse_double(const std::string& key, const std::string& v) {
        std::size_t pos = 0;
        double out = 0;
        try {
            out = std::stod(v, &pos);
        } catch (...) {
            throw UsageError("config key " + key + ": not a number: " + v);
        }
        if (pos != v.size())
            throw UsageError("config key " + key + ": not a number: " + v);
        return out;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace tcnot
