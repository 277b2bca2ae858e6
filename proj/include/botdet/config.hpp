#pragma once

#include <map>
#include <string>
#include <vector>

#include "botdet/flow.hpp"
#include "botdet/forest.hpp"
#include "botdet/synth.hpp"
#include "botdet/util.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// TOML-style key/value config: [section] headers, key = value lines, comments
// with '#'. Values may be comma-separated lists.
// ---------------------------------------------------------------------------

struct ConfigFile {
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has(const std::string& section, const std::string& key) const {
        auto s = sections.find(section);
        return s != sections.end() && s->second.count(key) > 0;
    }
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback = "") const {
        auto s = sections.find(section);
        if (s == sections.end()) return fallback;
        auto k = s->second.find(key);
        return k == s->second.end() ? fallback : k->second;
    }
    int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const {
        if (!has(section, key)) return fallback;
        int64_t v;
        if (!parse_int(get(section, key), v))
            throw DataError("config: " + section + "." + key + " is not an integer");
        return v;
    }
    double get_double(const std::string& section, const std::string& key, double fallback) const {
        if (!has(section, key)) return fallback;
        double v;
        if (!parse_double(get(section, key), v))
            throw DataError("config: " + section + "." + key + " is not a number");
        return v;
    }
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) return fallback;
        std::string v = get(section, key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw DataError("config: " + section + "." + key + " is not a boolean");
    }
};

inline ConfigFile parse_config(const std::string& content) {
    ConfigFile out;
    std::string section;
    size_t pos = 0, line_no = 0;
    while (pos <= content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line = trim(std::string_view(content.data() + pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            if (pos > content.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']')
                throw DataError("config line " + std::to_string(line_no) + ": unterminated section");
            section = std::string(trim(line.substr(1, line.size() - 2)));
        } else {
            size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
            std::string key(trim(line.substr(0, eq)));
            std::string value(trim(line.substr(eq + 1)));
            if (key.empty())
                throw DataError("config line " + std::to_string(line_no) + ": empty key");
            out.sections[section][key] = value;
        }
        if (pos > content.size()) break;
    }
    return out;
}

inline ConfigFile load_config(const std::string& path) { return parse_config(read_file(path)); }

// ---------------------------------------------------------------------------
// Typed loaders
// ---------------------------------------------------------------------------

inline NetworkConfig network_config_from(const ConfigFile& cfg) {
    NetworkConfig nc;
    std::string ranges = cfg.get("network", "internal_ranges");
    if (ranges.empty()) throw DataError("config: network.internal_ranges is required");
    for (auto part : split(ranges, ',')) {
        CidrBlock block;
        if (!parse_cidr(part, block))
            throw DataError("config: bad CIDR in internal_ranges: " + std::string(part));
        nc.internal_ranges.push_back(block);
    }
    if (!cfg.has("network", "day_start"))
        throw DataError("config: network.day_start (epoch ms) is required");
    nc.day_start = cfg.get_int("network", "day_start", 0);
    if (cfg.has("network", "well_known_ports")) {
        nc.well_known_ports.clear();
        for (auto part : split(cfg.get("network", "well_known_ports"), ',')) {
            int64_t port;
            if (!parse_int(part, port) || port < 0 || port > 65535)
                throw DataError("config: bad port in well_known_ports");
            nc.well_known_ports.insert(static_cast<uint16_t>(port));
        }
    }
    nc.validate();
    return nc;
}

inline TrainConfig train_config_from(const ConfigFile& cfg, TrainConfig defaults = {}) {
    TrainConfig tc = defaults;
    tc.n_trees = static_cast<int>(cfg.get_int("train", "n_trees", tc.n_trees));
    tc.mtry = static_cast<int>(cfg.get_int("train", "mtry", tc.mtry));
    tc.min_leaf_size = static_cast<int>(cfg.get_int("train", "min_leaf_size", tc.min_leaf_size));
    tc.max_depth = static_cast<int>(cfg.get_int("train", "max_depth", tc.max_depth));
    tc.balance = cfg.get_bool("train", "balance", tc.balance);
    return tc;
}

// Profile knobs exposed as flat keys; anything not present keeps the built-in
// default for that class.
inline SynthProfile synth_profile_from(const ConfigFile& cfg, const std::string& section,
                                       SynthProfile defaults) {
    SynthProfile p = defaults;
    p.n_hosts = static_cast<int>(cfg.get_int(section, "n_hosts", p.n_hosts));
    p.devices_min = static_cast<int>(cfg.get_int(section, "devices_min", p.devices_min));
    p.devices_max = static_cast<int>(cfg.get_int(section, "devices_max", p.devices_max));
    if (cfg.has(section, "flows_per_device_pair_mean"))
        p.flows_per_device_pair = Distribution::poisson_plus_one(
            cfg.get_double(section, "flows_per_device_pair_mean", 20.0));
    p.interarrival.mean_ms =
        cfg.get_double(section, "interarrival_mean_ms", p.interarrival.mean_ms);
    p.interarrival.jitter_cv =
        cfg.get_double(section, "interarrival_jitter_cv", p.interarrival.jitter_cv);
    p.interarrival.in_session_gap_ms =
        cfg.get_double(section, "in_session_gap_ms", p.interarrival.in_session_gap_ms);
    p.interarrival.flows_per_session = static_cast<int>(
        cfg.get_int(section, "flows_per_session", p.interarrival.flows_per_session));
    p.singleton_frac = cfg.get_double(section, "singleton_frac", p.singleton_frac);
    return p;
}

}  // namespace botdet
