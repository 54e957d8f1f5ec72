#include "mnistcnn/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "mnistcnn/errors.hpp"

namespace mcnn {

void RunManifest::set(const std::string& key, double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    entries[key] = buf;
}

std::string RunManifest::serialize() const {
    std::string out = "command=" + command + "\n";
    out += std::string("tool_version=") + kToolVersion + "\n";
    for (const auto& [key, value] : entries) out += key + "=" + value + "\n";
    return out;
}

void RunManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << serialize();
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    RunManifest manifest;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("malformed manifest line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "command")
            manifest.command = value;
        else if (key != "tool_version")
            manifest.entries[key] = value;
    }
    return manifest;
}

}  // namespace mcnn
