#pragma once

#include <compare>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "botdet/util.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// Addresses and network configuration
// ---------------------------------------------------------------------------

struct Ipv4 {
    uint32_t value = 0;  // host byte order

    auto operator<=>(const Ipv4&) const = default;
};

inline bool parse_ipv4(std::string_view s, Ipv4& out) {
    s = trim(s);
    uint32_t acc = 0;
    int octets = 0;
    size_t i = 0;
    while (i <= s.size()) {
        size_t j = i;
        uint32_t oct = 0;
        int digits = 0;
        while (j < s.size() && s[j] >= '0' && s[j] <= '9') {
            oct = oct * 10 + static_cast<uint32_t>(s[j] - '0');
            if (oct > 255) return false;
            ++j;
            ++digits;
        }
        if (digits == 0 || digits > 3) return false;
        acc = (acc << 8) | oct;
        ++octets;
        if (j == s.size()) break;
        if (s[j] != '.' || octets == 4) return false;
        i = j + 1;
        if (i > s.size()) return false;
        continue;
    }
    if (octets != 4) return false;
    out.value = acc;
    return true;
}

inline std::string format_ipv4(Ipv4 ip) {
    std::string out;
    out.reserve(15);
    for (int shift = 24; shift >= 0; shift -= 8) {
        out += std::to_string((ip.value >> shift) & 0xff);
        if (shift > 0) out += '.';
    }
    return out;
}

struct CidrBlock {
    Ipv4 base;
    int prefix = 0;  // 0..32

    uint32_t mask() const { return prefix == 0 ? 0u : ~uint32_t(0) << (32 - prefix); }
    bool contains(Ipv4 ip) const { return (ip.value & mask()) == (base.value & mask()); }
    uint32_t first() const { return base.value & mask(); }
    uint32_t last() const { return first() | ~mask(); }
};

inline bool parse_cidr(std::string_view s, CidrBlock& out) {
    s = trim(s);
    size_t slash = s.find('/');
    if (slash == std::string_view::npos) return false;
    Ipv4 base;
    if (!parse_ipv4(s.substr(0, slash), base)) return false;
    int prefix = 0;
    if (!parse_int(s.substr(slash + 1), prefix) || prefix < 0 || prefix > 32) return false;
    out.base = base;
    out.prefix = prefix;
    return true;
}

inline std::string format_cidr(const CidrBlock& b) {
    return format_ipv4(b.base) + "/" + std::to_string(b.prefix);
}

constexpr int64_t kMsPerDay = 24LL * 60 * 60 * 1000;
constexpr int64_t kBinMs = 5LL * 60 * 1000;
constexpr int kBinsPerDay = 288;

struct NetworkConfig {
    std::vector<CidrBlock> internal_ranges;
    int64_t day_start = 0;  // epoch ms UTC, start of the 24h analysis window
    std::set<uint16_t> well_known_ports = {80, 443, 53, 25};

    void validate() const {
        if (internal_ranges.empty()) throw DataError("network config: internal_ranges is empty");
        for (size_t i = 0; i < internal_ranges.size(); ++i) {
            for (size_t j = i + 1; j < internal_ranges.size(); ++j) {
                const auto& a = internal_ranges[i];
                const auto& b = internal_ranges[j];
                if (a.first() <= b.last() && b.first() <= a.last())
                    throw DataError("network config: overlapping ranges " + format_cidr(a) + " and " +
                                    format_cidr(b));
            }
        }
    }
};

enum class EndpointRole { Internal, External };

inline EndpointRole classify_endpoint(Ipv4 ip, const NetworkConfig& config) {
    for (const auto& range : config.internal_ranges) {
        if (range.contains(ip)) return EndpointRole::Internal;
    }
    return EndpointRole::External;
}

// ---------------------------------------------------------------------------
// Flow records
// ---------------------------------------------------------------------------

// One NetFlow row: endpoints, ports, bytes, packets, times, protocol, flag.
struct FlowRecord {
    Ipv4 src_ip;
    Ipv4 dst_ip;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint64_t bytes = 0;
    uint64_t packets = 1;
    int64_t start_time = 0;  // epoch ms UTC
    int64_t end_time = 0;    // epoch ms UTC
    uint8_t protocol = 6;
    std::string flag;  // opaque TCP flag summary, carried through unchanged

    bool operator==(const FlowRecord&) const = default;
};

inline bool protocol_has_ports(uint8_t protocol) { return protocol == 6 || protocol == 17; }

struct ParseError {
    enum class Kind { MalformedLine, InvariantViolation };
    Kind kind;
    size_t line_no;  // 1-based
    std::string message;
};

inline const char* parse_error_kind_name(ParseError::Kind k) {
    return k == ParseError::Kind::MalformedLine ? "malformed_line" : "invariant_violation";
}

// Parses one headerless CSV line in field order
// src_ip,dst_ip,src_port,dst_port,bytes,packets,start_time,end_time,protocol,flag.
// Returns false and fills err on failure.
inline bool parse_flow_line(std::string_view line, size_t line_no, FlowRecord& out, ParseError& err) {
    auto fields = split(line, ',');
    if (fields.size() != 10) {
        err = {ParseError::Kind::MalformedLine, line_no,
               "expected 10 fields, got " + std::to_string(fields.size())};
        return false;
    }
    FlowRecord r;
    if (!parse_ipv4(fields[0], r.src_ip)) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid src_ip"};
        return false;
    }
    if (!parse_ipv4(fields[1], r.dst_ip)) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid dst_ip"};
        return false;
    }
    uint32_t sport, dport;
    if (!parse_int(fields[2], sport) || sport > 65535) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid src_port"};
        return false;
    }
    if (!parse_int(fields[3], dport) || dport > 65535) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid dst_port"};
        return false;
    }
    r.src_port = static_cast<uint16_t>(sport);
    r.dst_port = static_cast<uint16_t>(dport);
    if (!parse_int(fields[4], r.bytes)) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid bytes"};
        return false;
    }
    if (!parse_int(fields[5], r.packets) || r.packets == 0) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid packets"};
        return false;
    }
    if (!parse_int(fields[6], r.start_time)) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid start_time"};
        return false;
    }
    if (!parse_int(fields[7], r.end_time)) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid end_time"};
        return false;
    }
    uint32_t proto;
    if (!parse_int(fields[8], proto) || proto > 255) {
        err = {ParseError::Kind::MalformedLine, line_no, "invalid protocol"};
        return false;
    }
    r.protocol = static_cast<uint8_t>(proto);
    r.flag = std::string(trim(fields[9]));

    if (r.end_time < r.start_time) {
        err = {ParseError::Kind::InvariantViolation, line_no, "end_time < start_time"};
        return false;
    }
    if (protocol_has_ports(r.protocol) && (r.src_port == 0 || r.dst_port == 0)) {
        err = {ParseError::Kind::InvariantViolation, line_no, "port 0 on ported protocol"};
        return false;
    }
    out = std::move(r);
    return true;
}

inline std::string serialize_flow(const FlowRecord& r) {
    std::string out;
    out += format_ipv4(r.src_ip);
    out += ',';
    out += format_ipv4(r.dst_ip);
    out += ',';
    out += std::to_string(r.src_port);
    out += ',';
    out += std::to_string(r.dst_port);
    out += ',';
    out += std::to_string(r.bytes);
    out += ',';
    out += std::to_string(r.packets);
    out += ',';
    out += std::to_string(r.start_time);
    out += ',';
    out += std::to_string(r.end_time);
    out += ',';
    out += std::to_string(r.protocol);
    out += ',';
    out += r.flag;
    return out;
}

struct FlowFile {
    std::vector<FlowRecord> records;
    std::vector<size_t> line_of;  // source line (1-based) per record
    std::vector<ParseError> errors;
    size_t total_lines = 0;  // non-empty data lines seen
};

struct ReadOptions {
    bool lenient = true;    // skip bad lines instead of throwing
    bool has_header = false;
};

inline FlowFile read_flow_csv_stream(std::istream& in, const ReadOptions& opts = {}) {
    FlowFile out;
    std::string line;
    size_t line_no = 0;
    bool skip_header = opts.has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skip_header) {
            skip_header = false;
            continue;
        }
        if (trim(line).empty()) continue;
        ++out.total_lines;
        FlowRecord r;
        ParseError err;
        if (parse_flow_line(line, line_no, r, err)) {
            out.records.push_back(std::move(r));
            out.line_of.push_back(line_no);
        } else {
            if (!opts.lenient)
                throw DataError("line " + std::to_string(err.line_no) + ": " + err.message);
            out.errors.push_back(std::move(err));
        }
    }
    return out;
}

inline FlowFile read_flow_csv(const std::string& path, const ReadOptions& opts = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open flow file: " + path);
    return read_flow_csv_stream(in, opts);
}

}  // namespace botdet
