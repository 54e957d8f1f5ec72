#pragma once

#include <map>
#include <string>

namespace mcnn {

/// Flat key=value record of a fully resolved command invocation: command
/// name, every config value with defaults materialized, seed, input file
/// digests, tool version. Re-running a manifest reproduces outputs.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> entries;  // sorted, deterministic output

    void set(const std::string& key, const std::string& value) { entries[key] = value; }
    void set(const std::string& key, long long value) { entries[key] = std::to_string(value); }
    void set(const std::string& key, double value);

    std::string serialize() const;
    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);
};

constexpr const char* kToolVersion = "1.0.0";

}  // namespace mcnn
