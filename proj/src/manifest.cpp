#include "longdiff/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "longdiff/errors.hpp"

namespace longdiff {

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::stamp_start() { started_at = iso8601_now(); }
void RunManifest::stamp_finish() { finished_at = iso8601_now(); }

void RunManifest::write(const std::string& path) const {
    nlohmann::json j{
        {"command", command},
        {"engine_version", kEngineVersion},
        {"seed", seed},
        {"config", config},
        {"inputs", inputs},
        {"outputs", outputs},
        {"started_at", started_at},
        {"finished_at", finished_at},
    };
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace longdiff
