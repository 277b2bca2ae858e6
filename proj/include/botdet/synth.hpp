#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "botdet/aggregate.hpp"
#include "botdet/labels.hpp"
#include "botdet/rng.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// Labeled synthetic NetFlow days. Bot hosts beacon: near-constant packet
// counts, a couple of dominant byte/packet ratios, low-jitter inter-arrivals.
// Normal hosts browse: dispersed sizes, bursty sessions spread over the day.
//
// A fraction of hosts on BOTH sides are single-flow hosts whose packet count
// is the only class-informative field; the class densities over packet count
// cross smoothly, so the classes overlap irreducibly and classifier error
// stays realistic instead of collapsing to zero.
// ---------------------------------------------------------------------------

enum class HostClass { Bot, Normal };

struct Distribution {
    enum class Kind { DiscreteWeighted, LogNormalMean, UniformInt, PoissonPlusOne };
    Kind kind = Kind::UniformInt;
    std::vector<double> values;   // DiscreteWeighted
    std::vector<double> weights;  // DiscreteWeighted
    double mean = 0.0;            // LogNormalMean, PoissonPlusOne
    double sigma = 0.0;           // LogNormalMean
    int64_t lo = 0, hi = 0;       // UniformInt

    static Distribution discrete(std::vector<double> v, std::vector<double> w) {
        Distribution d;
        d.kind = Kind::DiscreteWeighted;
        d.values = std::move(v);
        d.weights = std::move(w);
        return d;
    }
    static Distribution lognormal_mean(double mean, double sigma) {
        Distribution d;
        d.kind = Kind::LogNormalMean;
        d.mean = mean;
        d.sigma = sigma;
        return d;
    }
    static Distribution uniform_int(int64_t lo, int64_t hi) {
        Distribution d;
        d.kind = Kind::UniformInt;
        d.lo = lo;
        d.hi = hi;
        return d;
    }
    static Distribution poisson_plus_one(double mean) {
        Distribution d;
        d.kind = Kind::PoissonPlusOne;
        d.mean = mean;
        return d;
    }

    double sample(Rng& rng) const {
        switch (kind) {
            case Kind::DiscreteWeighted: {
                Rng& r = rng;
                return values[r.weighted_pick(weights)];
            }
            case Kind::LogNormalMean:
                return rng.lognormal_mean(mean, sigma);
            case Kind::UniformInt:
                return static_cast<double>(rng.uniform_range(lo, hi));
            case Kind::PoissonPlusOne:
                return static_cast<double>(rng.poisson(mean) + 1);
        }
        return 0.0;
    }

    void validate(const std::string& what) const {
        switch (kind) {
            case Kind::DiscreteWeighted:
                if (values.empty() || values.size() != weights.size())
                    throw DataError("profile: " + what + ": bad discrete distribution");
                for (double v : values)
                    if (v <= 0.0) throw DataError("profile: " + what + ": values must be positive");
                for (double w : weights)
                    if (w <= 0.0) throw DataError("profile: " + what + ": weights must be positive");
                break;
            case Kind::LogNormalMean:
                if (mean <= 0.0 || sigma <= 0.0)
                    throw DataError("profile: " + what + ": mean and sigma must be positive");
                break;
            case Kind::UniformInt:
                if (lo <= 0 || hi < lo) throw DataError("profile: " + what + ": bad uniform range");
                break;
            case Kind::PoissonPlusOne:
                if (mean <= 0.0) throw DataError("profile: " + what + ": mean must be positive");
                break;
        }
    }
};

struct InterarrivalModel {
    enum class Kind { Periodic, Bursty };
    Kind kind = Kind::Periodic;
    // Periodic: gap = mean_ms * jitter, jitter ~ N(1, jitter_cv)
    double mean_ms = 680.0;
    double jitter_cv = 0.05;
    // Bursty: sessions spread over the day, exponential gaps inside a session
    double in_session_gap_ms = 1500.0;
    int flows_per_session = 8;
};

struct SynthProfile {
    HostClass cls = HostClass::Bot;
    int n_hosts = 100;
    int devices_min = 3;
    int devices_max = 8;
    Distribution flows_per_device_pair;
    Distribution packets_per_flow;
    // When dominant_ratio_values is non-empty (the bot case), bytes are coupled
    // to packets as round(packets * ratio) and this distribution is ignored:
    // fixed command lengths are the signature being modeled.
    Distribution bytes_per_flow;
    std::vector<double> dominant_ratio_values;
    std::vector<double> dominant_ratio_weights;
    InterarrivalModel interarrival;
    Distribution duration_ms;
    // fraction of hosts that appear exactly once in the day; see singleton_shape
    double singleton_frac = 0.0;
    uint64_t seed = 0;

    void validate() const {
        if (n_hosts < 0) throw DataError("profile: n_hosts must be >= 0");
        if (devices_min < 1 || devices_max < devices_min)
            throw DataError("profile: bad devices_per_host range");
        flows_per_device_pair.validate("flows_per_device_pair");
        packets_per_flow.validate("packets_per_flow");
        bytes_per_flow.validate("bytes_per_flow");
        duration_ms.validate("duration_ms");
        if (cls == HostClass::Bot && dominant_ratio_values.size() > 3)
            throw DataError("profile: bot dominant_ratio_values must have <= 3 elements");
        if (dominant_ratio_values.size() != dominant_ratio_weights.size())
            throw DataError("profile: dominant ratio values/weights size mismatch");
        for (double v : dominant_ratio_values)
            if (v <= 0.0) throw DataError("profile: dominant ratios must be positive");
        if (singleton_frac < 0 || singleton_frac > 0.9)
            throw DataError("profile: bad singleton fraction");
        if (interarrival.mean_ms <= 0 || interarrival.jitter_cv < 0 ||
            interarrival.in_session_gap_ms <= 0 || interarrival.flows_per_session < 1)
            throw DataError("profile: bad interarrival model");
    }

    // Beaconing C2: ~5 packets/flow with SD < 1, two dominant ratios, 680 ms
    // mean gap with tight jitter. Byte/packet medians land on 5 and 1000.
    static SynthProfile bot_defaults() {
        SynthProfile p;
        p.cls = HostClass::Bot;
        p.n_hosts = 100;
        p.devices_min = 3;
        p.devices_max = 8;
        p.flows_per_device_pair = Distribution::poisson_plus_one(20.0);
        p.packets_per_flow = Distribution::discrete({4, 5, 6}, {0.2, 0.6, 0.2});
        p.bytes_per_flow = Distribution::discrete({1000}, {1.0});  // implied by ratios
        p.dominant_ratio_values = {200.0, 196.0};
        p.dominant_ratio_weights = {0.8, 0.2};
        p.interarrival.kind = InterarrivalModel::Kind::Periodic;
        p.interarrival.mean_ms = 680.0;
        p.interarrival.jitter_cv = 0.05;
        p.duration_ms = Distribution::uniform_int(20, 90);
        p.singleton_frac = 0.26;
        return p;
    }

    // Browsing traffic: ~19 packets and ~14000 bytes per flow on average but
    // widely dispersed, sessions scattered over the day.
    static SynthProfile normal_defaults() {
        SynthProfile p;
        p.cls = HostClass::Normal;
        p.n_hosts = 900;
        p.devices_min = 1;
        p.devices_max = 4;
        p.flows_per_device_pair = Distribution::poisson_plus_one(60.0);
        p.packets_per_flow = Distribution::lognormal_mean(19.0, 0.8);
        p.bytes_per_flow = Distribution::lognormal_mean(14000.0, 1.0);
        p.interarrival.kind = InterarrivalModel::Kind::Bursty;
        p.interarrival.in_session_gap_ms = 1500.0;
        p.interarrival.flows_per_session = 8;
        p.duration_ms = Distribution::lognormal_mean(3000.0, 1.0);
        p.singleton_frac = 0.10;
        return p;
    }
};

struct SynthDay {
    std::vector<FlowRecord> records;  // time-sorted
    LabelSet truth;                   // generated bot hosts with family names
};

namespace synth_detail {

inline Ipv4 host_address(HostClass cls, int index) {
    // bots in 60.0.0.0/9, normals in 60.128.0.0/9; disjoint by construction
    uint32_t base = cls == HostClass::Bot ? 0x3C000000u : 0x3C800000u;
    return Ipv4{base + static_cast<uint32_t>(index) + 1};
}

inline Ipv4 device_address(uint64_t index) {
    // inside 10.0.0.0/8, avoiding .0 and .255 octets
    uint32_t i = static_cast<uint32_t>(index);
    return Ipv4{0x0A000000u | ((i / 62500) << 16) | (((i / 250) % 250 + 1) << 8) |
                (i % 250 + 1)};
}

inline uint16_t ephemeral_port(Rng& rng) {
    return static_cast<uint16_t>(49152 + rng.uniform_int(16384));
}

inline const char* pick_flag(Rng& rng) {
    static const char* flags[] = {"S", "SA", "PA", "FSA"};
    return flags[rng.uniform_int(4)];
}

struct FlowShape {
    uint64_t packets = 1;
    uint64_t bytes = 0;
    int64_t duration_ms = 1;
};

// Single-flow hosts: everything except the packet count (bytes, duration,
// ports, timing) is sampled identically for both classes, so packet count is
// the only signal. The class densities over p in [2, 40] cross smoothly (bot
// weight falls linearly, normal weight rises quadratically), which leaves an
// irreducible, smoothly graded overlap between the classes.
inline const std::vector<double>& singleton_packet_weights(HostClass cls) {
    static const std::vector<double> bot = [] {
        std::vector<double> w;
        for (int p = 2; p <= 40; ++p) w.push_back(static_cast<double>(41 - p));
        return w;
    }();
    static const std::vector<double> normal = [] {
        std::vector<double> w;
        for (int p = 2; p <= 40; ++p)
            w.push_back(static_cast<double>(p - 1) * static_cast<double>(p - 1));
        return w;
    }();
    return cls == HostClass::Bot ? bot : normal;
}

inline FlowShape singleton_shape(HostClass cls, Rng& rng) {
    FlowShape s;
    s.packets = 2 + rng.weighted_pick(singleton_packet_weights(cls));
    s.bytes = static_cast<uint64_t>(rng.uniform_range(1800, 7200));  // independent of packets
    s.duration_ms = rng.uniform_range(20, 5000);
    return s;
}

inline FlowShape archetype_shape(const SynthProfile& p, Rng& rng) {
    FlowShape s;
    s.packets = std::max<uint64_t>(1, static_cast<uint64_t>(llround(p.packets_per_flow.sample(rng))));
    if (!p.dominant_ratio_values.empty()) {
        double ratio = p.dominant_ratio_values[rng.weighted_pick(p.dominant_ratio_weights)];
        s.bytes = static_cast<uint64_t>(llround(static_cast<double>(s.packets) * ratio));
    } else {
        s.bytes = std::max(s.packets,
                           static_cast<uint64_t>(llround(p.bytes_per_flow.sample(rng))));
    }
    s.duration_ms = std::max<int64_t>(1, llround(p.duration_ms.sample(rng)));
    return s;
}

// start times for one host over [0, kMsPerDay)
inline std::vector<int64_t> start_offsets(const SynthProfile& p, size_t n_flows, Rng& rng) {
    std::vector<int64_t> t;
    t.reserve(n_flows);
    if (p.interarrival.kind == InterarrivalModel::Kind::Periodic) {
        double est = static_cast<double>(n_flows) * p.interarrival.mean_ms * 1.5 + 60000.0;
        int64_t slack = kMsPerDay - static_cast<int64_t>(est);
        int64_t start = slack > 0 ? rng.uniform_range(0, slack) : 0;
        double cur = static_cast<double>(start);
        for (size_t i = 0; i < n_flows; ++i) {
            t.push_back(std::min<int64_t>(llround(cur), kMsPerDay - 1));
            double jitter = std::max(0.05, rng.normal(1.0, p.interarrival.jitter_cv));
            cur += p.interarrival.mean_ms * jitter;
        }
    } else {
        size_t n_sessions = std::clamp<size_t>(n_flows / static_cast<size_t>(p.interarrival.flows_per_session),
                                               2, 48);
        if (n_flows < 2) n_sessions = 1;
        // stratified session starts keep sessions well separated
        int64_t stratum = kMsPerDay / static_cast<int64_t>(n_sessions);
        std::vector<size_t> per_session(n_sessions, n_flows / n_sessions);
        for (size_t i = 0; i < n_flows % n_sessions; ++i) per_session[i] += 1;
        for (size_t s = 0; s < n_sessions; ++s) {
            double cur = static_cast<double>(static_cast<int64_t>(s) * stratum) +
                         rng.uniform() * 0.4 * static_cast<double>(stratum);
            for (size_t i = 0; i < per_session[s]; ++i) {
                t.push_back(std::min<int64_t>(llround(cur), kMsPerDay - 1));
                cur += std::max(1.0, rng.exponential(p.interarrival.in_session_gap_ms));
            }
        }
        std::sort(t.begin(), t.end());
    }
    return t;
}

}  // namespace synth_detail

// All flows for one host of the profile's class. host_index selects the
// host's address and its independent RNG stream.
inline std::vector<FlowRecord> generate_host(const SynthProfile& profile, int host_index,
                                             const NetworkConfig& config) {
    using namespace synth_detail;
    Rng rng(derive_stream(profile.seed, static_cast<uint64_t>(host_index)));
    Ipv4 host = host_address(profile.cls, host_index);
    std::vector<FlowRecord> out;

    auto emit = [&](Ipv4 device, const FlowShape& shape, int64_t start_offset, bool device_initiated,
                    uint16_t service_port, uint8_t protocol) {
        FlowRecord r;
        int64_t start = config.day_start + start_offset;
        r.start_time = start;
        r.end_time = start + shape.duration_ms;
        r.bytes = shape.bytes;
        r.packets = shape.packets;
        r.protocol = protocol;
        r.flag = pick_flag(rng);
        if (device_initiated) {
            r.src_ip = device;
            r.src_port = ephemeral_port(rng);
            r.dst_ip = host;
            r.dst_port = service_port;
        } else {
            r.src_ip = host;
            r.src_port = ephemeral_port(rng);
            r.dst_ip = device;
            r.dst_port = service_port;
        }
        out.push_back(std::move(r));
    };

    if (rng.uniform() < profile.singleton_frac) {
        FlowShape shape = singleton_shape(profile.cls, rng);
        Ipv4 device = device_address(rng.uniform_int(3000));
        int64_t offset = rng.uniform_range(0, kMsPerDay - 1);
        uint16_t port = rng.uniform() < 0.5 ? 443 : 80;
        emit(device, shape, offset, true, port, 6);
        return out;
    }

    int n_devices = static_cast<int>(rng.uniform_range(profile.devices_min, profile.devices_max));
    std::vector<Ipv4> devices;
    for (int d = 0; d < n_devices; ++d) devices.push_back(device_address(rng.uniform_int(3000)));

    size_t n_flows = 0;
    for (int d = 0; d < n_devices; ++d)
        n_flows += static_cast<size_t>(std::max<int64_t>(1, llround(profile.flows_per_device_pair.sample(rng))));
    if (profile.cls == HostClass::Normal) n_flows = std::max<size_t>(n_flows, 3);

    std::vector<int64_t> offsets = start_offsets(profile, n_flows, rng);
    bool bot = profile.cls == HostClass::Bot;
    uint16_t service_port = rng.uniform() < 0.7 ? 443 : 80;
    for (size_t i = 0; i < offsets.size(); ++i) {
        FlowShape shape = archetype_shape(profile, rng);
        Ipv4 device = devices[static_cast<size_t>(rng.uniform_int(devices.size()))];
        if (bot) {
            emit(device, shape, offsets[i], true, service_port, 6);
        } else {
            double roll = rng.uniform();
            if (roll < 0.85) {
                // device browsing the host
                uint16_t port = rng.uniform() < 0.8 ? (rng.uniform() < 0.6 ? 443 : 80) : 53;
                emit(device, shape, offsets[i], true, port, port == 53 ? 17 : 6);
            } else if (roll < 0.95) {
                // ambiguous peer-to-peer-ish ports
                FlowRecord r;
                r.src_ip = device;
                r.src_port = ephemeral_port(rng);
                r.dst_ip = host;
                r.dst_port = ephemeral_port(rng);
                r.bytes = shape.bytes;
                r.packets = shape.packets;
                r.start_time = config.day_start + offsets[i];
                r.end_time = r.start_time + shape.duration_ms;
                r.protocol = 6;
                r.flag = pick_flag(rng);
                out.push_back(std::move(r));
            } else {
                // host reaching into the device
                emit(device, shape, offsets[i], false, 80, 6);
            }
        }
    }
    return out;
}

// A full synthetic day: flow records plus ground-truth labels for the bot
// hosts. Deterministic in (profiles, config).
inline SynthDay generate_day(const SynthProfile& bot, const SynthProfile& normal,
                             const NetworkConfig& config) {
    if (bot.cls != HostClass::Bot || normal.cls != HostClass::Normal)
        throw DataError("generate_day: profiles must be (Bot, Normal)");
    bot.validate();
    normal.validate();
    config.validate();

    SynthDay day;
    day.truth.source = "synthetic-truth";
    static const char* families[] = {"synthfam_alpha", "synthfam_beta", "synthfam_gamma"};
    for (int h = 0; h < bot.n_hosts; ++h) {
        auto flows = generate_host(bot, h, config);
        day.records.insert(day.records.end(), flows.begin(), flows.end());
        day.truth.entries.emplace(synth_detail::host_address(HostClass::Bot, h), families[h % 3]);
    }
    for (int h = 0; h < normal.n_hosts; ++h) {
        auto flows = generate_host(normal, h, config);
        day.records.insert(day.records.end(), flows.begin(), flows.end());
    }
    std::sort(day.records.begin(), day.records.end(), detail::flow_less);
    return day;
}

inline std::string flows_to_csv(const std::vector<FlowRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += serialize_flow(r);
        out += '\n';
    }
    return out;
}

inline std::string truth_to_csv(const LabelSet& truth) {
    std::string out;
    for (const auto& [ip, family] : truth.entries) {
        out += format_ipv4(ip);
        out += ',';
        out += family;
        out += '\n';
    }
    return out;
}

}  // namespace botdet
