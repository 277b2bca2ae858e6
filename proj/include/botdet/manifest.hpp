#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <json.hpp>

#include "botdet/util.hpp"

namespace botdet {

constexpr const char* kToolVersion = "0.1.0";

// Written atomically alongside every command output. The config digest makes
// reruns verifiable; timestamps are metadata and excluded from determinism
// guarantees.
struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string config_digest;  // fnv1a64 over the effective config text
    uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    int64_t started_at = 0;  // epoch ms
    int64_t finished_at = 0;
    nlohmann::ordered_json extra;  // per-command counters (skipped lines, row counts, ...)

    static int64_t now_ms() {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["tool_version"] = tool_version;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["config_digest"] = config_digest;
        j["seed"] = seed;
        j["started_at"] = started_at;
        j["finished_at"] = finished_at;
        if (!extra.is_null()) j["stats"] = extra;
        return j;
    }

    // manifest sits next to the primary output as <output>.manifest.json
    void write_for(const std::string& primary_output) const {
        write_file_atomic(primary_output + ".manifest.json", to_json().dump(2) + "\n");
    }
};

inline std::string config_digest_of(const std::string& config_text) {
    return hex64(fnv1a64(config_text));
}

}  // namespace botdet
