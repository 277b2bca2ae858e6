#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "botdet/flow.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// The C2-centric pivot: all traffic between one external host and the internal
// devices it talks to, over a single 24-hour window.
// ---------------------------------------------------------------------------

struct HostTrafficView {
    Ipv4 host_ip;                  // the external endpoint
    std::vector<FlowRecord> flows;  // both directions, time-ordered
    std::set<Ipv4> device_ips;     // internal endpoints seen with this host
    int64_t window_start = 0;
    int64_t window_end = 0;  // exclusive
};

struct Discard {
    size_t line_ref;  // index into the input record list (or source line when mapped)
    std::string reason;
};

struct GroupResult {
    std::vector<HostTrafficView> views;  // sorted by host_ip
    std::vector<Discard> discards;
};

namespace detail {

// Full deterministic ordering; makes every downstream feature independent of
// input record order even when start times tie.
inline bool flow_less(const FlowRecord& a, const FlowRecord& b) {
    return std::tie(a.start_time, a.end_time, a.src_ip, a.dst_ip, a.src_port, a.dst_port, a.bytes,
                    a.packets, a.protocol, a.flag) <
           std::tie(b.start_time, b.end_time, b.src_ip, b.dst_ip, b.src_port, b.dst_port, b.bytes,
                    b.packets, b.protocol, b.flag);
}

}  // namespace detail

// Partitions records by their external endpoint. Records with zero or two
// external endpoints, or starting outside the analysis window, go to the
// discard report; everything else lands in exactly one view.
inline GroupResult group_by_external_host(const std::vector<FlowRecord>& records,
                                          const NetworkConfig& config) {
    GroupResult out;
    std::map<Ipv4, HostTrafficView> by_host;
    const int64_t window_end = config.day_start + kMsPerDay;
    for (size_t i = 0; i < records.size(); ++i) {
        const FlowRecord& r = records[i];
        bool src_internal = classify_endpoint(r.src_ip, config) == EndpointRole::Internal;
        bool dst_internal = classify_endpoint(r.dst_ip, config) == EndpointRole::Internal;
        if (src_internal && dst_internal) {
            out.discards.push_back({i, "internal_to_internal"});
            continue;
        }
        if (!src_internal && !dst_internal) {
            out.discards.push_back({i, "external_to_external"});
            continue;
        }
        if (r.start_time < config.day_start || r.start_time >= window_end) {
            out.discards.push_back({i, "outside_window"});
            continue;
        }
        Ipv4 host = src_internal ? r.dst_ip : r.src_ip;
        Ipv4 device = src_internal ? r.src_ip : r.dst_ip;
        auto& view = by_host[host];
        if (view.flows.empty()) {
            view.host_ip = host;
            view.window_start = config.day_start;
            view.window_end = window_end;
        }
        view.flows.push_back(r);
        view.device_ips.insert(device);
    }
    out.views.reserve(by_host.size());
    for (auto& [_, view] : by_host) {
        std::sort(view.flows.begin(), view.flows.end(), detail::flow_less);
        out.views.push_back(std::move(view));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Five-minute binning over the 24-hour window
// ---------------------------------------------------------------------------

struct BinCounts {
    uint64_t flow_count = 0;
    uint64_t packet_sum = 0;
    uint64_t byte_sum = 0;
};

struct BinnedCounts {
    std::array<BinCounts, kBinsPerDay> bins{};
};

// Bins are half-open [t, t+5min) aligned to the window start; flows are
// assigned by start_time only.
inline BinnedCounts bin_flows(const HostTrafficView& view) {
    BinnedCounts out;
    for (const FlowRecord& r : view.flows) {
        int64_t idx = (r.start_time - view.window_start) / kBinMs;
        if (idx < 0 || idx >= kBinsPerDay) throw DataError("flow start outside view window");
        auto& bin = out.bins[static_cast<size_t>(idx)];
        bin.flow_count += 1;
        bin.packet_sum += r.packets;
        bin.byte_sum += r.bytes;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Who initiated the conversation
// ---------------------------------------------------------------------------

enum class Initiator { Device, Host, Unknown };

// Port heuristic: the side talking from an ephemeral port to a well-known port
// is the initiator. Flows the rule cannot decide stay Unknown.
inline Initiator infer_initiator(const FlowRecord& flow, const NetworkConfig& config) {
    bool src_internal = classify_endpoint(flow.src_ip, config) == EndpointRole::Internal;
    bool dst_internal = classify_endpoint(flow.dst_ip, config) == EndpointRole::Internal;
    if (src_internal == dst_internal) throw DataError("flow does not have one internal and one external endpoint");
    uint16_t device_port = src_internal ? flow.src_port : flow.dst_port;
    uint16_t host_port = src_internal ? flow.dst_port : flow.src_port;
    bool device_ephemeral = device_port >= 1024;
    bool host_ephemeral = host_port >= 1024;
    bool device_wk = config.well_known_ports.count(device_port) > 0;
    bool host_wk = config.well_known_ports.count(host_port) > 0;
    if (device_ephemeral && host_wk) return Initiator::Device;
    if (host_ephemeral && device_wk) return Initiator::Host;
    return Initiator::Unknown;
}

}  // namespace botdet
