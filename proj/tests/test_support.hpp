#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "botdet/aggregate.hpp"
#include "botdet/flow.hpp"
#include "botdet/rng.hpp"

namespace testsup {

using namespace botdet;

inline Ipv4 ip(int a, int b, int c, int d) {
    return Ipv4{(static_cast<uint32_t>(a) << 24) | (static_cast<uint32_t>(b) << 16) |
                (static_cast<uint32_t>(c) << 8) | static_cast<uint32_t>(d)};
}

constexpr int64_t kDayStart = 1700000000000;

inline NetworkConfig test_config() {
    NetworkConfig c;
    CidrBlock block;
    parse_cidr("10.0.0.0/8", block);
    c.internal_ranges = {block};
    c.day_start = kDayStart;
    return c;
}

struct FlowSpec {
    Ipv4 src, dst;
    uint16_t sport = 49152, dport = 443;
    uint64_t bytes = 1000, packets = 5;
    int64_t start_off = 0, dur = 100;
    uint8_t proto = 6;
    const char* flag = "SA";
};

inline FlowRecord make_flow(const FlowSpec& s) {
    FlowRecord r;
    r.src_ip = s.src;
    r.dst_ip = s.dst;
    r.src_port = s.sport;
    r.dst_port = s.dport;
    r.bytes = s.bytes;
    r.packets = s.packets;
    r.start_time = kDayStart + s.start_off;
    r.end_time = kDayStart + s.start_off + s.dur;
    r.protocol = s.proto;
    r.flag = s.flag;
    return r;
}

// device -> host flow with given size/time
inline FlowRecord dev_flow(int device_octet, Ipv4 host, uint64_t bytes, uint64_t packets,
                           int64_t start_off, int64_t dur = 100) {
    FlowSpec s;
    s.src = ip(10, 0, 0, device_octet);
    s.dst = host;
    s.bytes = bytes;
    s.packets = packets;
    s.start_off = start_off;
    s.dur = dur;
    return make_flow(s);
}

inline HostTrafficView single_view(const std::vector<FlowRecord>& records,
                                   const NetworkConfig& config) {
    GroupResult g = group_by_external_host(records, config);
    if (g.views.size() != 1) throw std::runtime_error("expected exactly one view");
    return std::move(g.views[0]);
}

// Random but always-valid view for property tests: one external host, flows in
// either direction with assorted ports, sizes, ties in start times included.
inline std::vector<FlowRecord> random_view_records(Rng& rng, int max_flows,
                                                   const NetworkConfig& config) {
    Ipv4 host = ip(93, 184, static_cast<int>(rng.uniform_int(200)) + 1,
                   static_cast<int>(rng.uniform_int(200)) + 1);
    int n = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_flows)));
    std::vector<FlowRecord> records;
    for (int i = 0; i < n; ++i) {
        FlowRecord r;
        Ipv4 device = ip(10, static_cast<int>(rng.uniform_int(4)),
                         static_cast<int>(rng.uniform_int(4)), static_cast<int>(rng.uniform_int(6)) + 1);
        bool device_src = rng.uniform() < 0.7;
        uint16_t wk[] = {80, 443, 53, 25};
        uint16_t service = wk[rng.uniform_int(4)];
        uint16_t eph = static_cast<uint16_t>(1024 + rng.uniform_int(60000));
        // sometimes both ephemeral, sometimes service on the wrong side
        bool odd = rng.uniform() < 0.3;
        uint16_t dev_port = odd ? static_cast<uint16_t>(1024 + rng.uniform_int(60000)) : eph;
        uint16_t host_port = odd && rng.uniform() < 0.5 ? static_cast<uint16_t>(1024 + rng.uniform_int(60000))
                                                        : service;
        if (device_src) {
            r.src_ip = device;
            r.src_port = dev_port;
            r.dst_ip = host;
            r.dst_port = host_port;
        } else {
            r.src_ip = host;
            r.src_port = host_port;
            r.dst_ip = device;
            r.dst_port = dev_port;
        }
        r.packets = 1 + rng.uniform_int(60);
        r.bytes = rng.uniform_int(64000);
        r.start_time = config.day_start + static_cast<int64_t>(rng.uniform_int(kMsPerDay));
        if (rng.uniform() < 0.2 && !records.empty())
            r.start_time = records.back().start_time;  // force ties
        r.end_time = r.start_time + static_cast<int64_t>(rng.uniform_int(60000));
        r.protocol = rng.uniform() < 0.8 ? 6 : 17;
        static const char* flags[] = {"S", "SA", "PA", "FSA", ""};
        r.flag = flags[rng.uniform_int(5)];
        records.push_back(std::move(r));
    }
    return records;
}

// ---------------------------------------------------------------------------
// scratch dirs + CLI driving
// ---------------------------------------------------------------------------

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::string templ = (std::filesystem::temp_directory_path() / "botdet_test_XXXXXX").string();
        std::vector<char> buf(templ.begin(), templ.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline int run_cli(const std::string& args) {
    std::string cmd = std::string(BOTDET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

inline int run_cli_capture(const std::string& args, const std::string& out_path) {
    std::string cmd = std::string(BOTDET_CLI_PATH) + " " + args + " >" + out_path + " 2>&1";
    int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

}  // namespace testsup
