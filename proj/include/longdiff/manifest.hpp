#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace longdiff {

inline constexpr const char* kEngineVersion = "0.1.0";

// Provenance record written next to every command's outputs: the command,
// its fully resolved configuration, seed, and file endpoints. Timestamps are
// wall-clock and therefore the one part of a run's outputs that differs
// between reruns.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;  // resolved key -> value
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string started_at;
    std::string finished_at;

    void stamp_start();
    void stamp_finish();
    void write(const std::string& path) const;
};

std::string iso8601_now();

}  // namespace longdiff
