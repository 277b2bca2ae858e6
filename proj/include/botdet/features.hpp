#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "botdet/aggregate.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// Fixed, ordered, versioned per-host feature schema
// ---------------------------------------------------------------------------

constexpr int kFeatureSchemaVersion = 1;

enum Feature : int {
    kTotalBytes = 0,
    kTotalPackets,
    kAvgBytesPerPacket,
    kDominantRatioCount90,
    kDominantRatioCount75,
    kDominantRatioCount65,
    kPacketsPerFlow,
    kBytesPerFlow,
    kIqrRatio,
    kSdRatio,
    kDominantFlowCount90,
    kTotalDurationMs,
    kDurMaxMs,
    kDurMedMs,
    kDominantSport,
    kDominantDport,
    kFlowFrequency,
    kCtMax,
    kCtMed,
    kInitiatorDeviceFraction,
    kDominantSportCount,
    kDominantDportCount,
    kUniqueDeviceCount,
    kPeriodicityCv,
    kTimeGapMeanMs,
    kSdPackets,
    kSdInterarrivalMs,
    kFeatureCount
};

inline const std::array<const char*, kFeatureCount>& feature_names() {
    static const std::array<const char*, kFeatureCount> names = {
        "total_bytes",
        "total_packets",
        "avg_bytes_per_packet",
        "dominant_ratio_count_90",
        "dominant_ratio_count_75",
        "dominant_ratio_count_65",
        "packets_per_flow",
        "bytes_per_flow",
        "iqr_ratio",
        "sd_ratio",
        "dominant_flow_count_90",
        "total_duration_ms",
        "dur_max_ms",
        "dur_med_ms",
        "dominant_sport",
        "dominant_dport",
        "flow_frequency",
        "ct_max",
        "ct_med",
        "initiator_device_fraction",
        "dominant_sport_count",
        "dominant_dport_count",
        "unique_device_count",
        "periodicity_cv",
        "time_gap_mean_ms",
        "sd_packets",
        "sd_interarrival_ms",
    };
    return names;
}

inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double& operator[](int i) { return values[static_cast<size_t>(i)]; }
    double operator[](int i) const { return values[static_cast<size_t>(i)]; }
};

// Label convention: the literal string "unknown" is the Unknown class, any
// other non-empty string is a malicious family name.
inline const char* kUnknownLabel = "unknown";

struct FeatureRow {
    std::string host_ip;
    std::string label;
    FeatureVector fv;
};

// ---------------------------------------------------------------------------
// Shared numeric conventions (the brute-force test oracle mirrors these)
// ---------------------------------------------------------------------------

// Bytes-per-packet ratios are quantized to 2 decimals before any frequency or
// run analysis, kept as integer hundredths to dodge float-equality issues.
inline int64_t ratio_centi(const FlowRecord& r) {
    return llround(static_cast<double>(r.bytes) / static_cast<double>(r.packets) * 100.0);
}

inline double centi_to_double(int64_t centi) { return static_cast<double>(centi) / 100.0; }

// Lower order statistic: value at index floor(q * (n-1)) with q = num/den,
// computed in integers. Median (1/2) is the lower median for even counts.
inline double quantile_lower(std::vector<double> sorted_values, int64_t num, int64_t den) {
    if (sorted_values.empty()) throw DataError("quantile of empty list");
    size_t idx = static_cast<size_t>((num * static_cast<int64_t>(sorted_values.size() - 1)) / den);
    return sorted_values[idx];
}

inline double median_lower(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return quantile_lower(std::move(values), 1, 2);
}

inline double mean_of(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

// Population form (divisor n), two-pass.
inline double population_sd(const std::vector<double>& values) {
    double mu = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mu) * (v - mu);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

// Smallest k such that the k most frequent values cover >= percent% of total.
// Ties between equally frequent values break toward the smaller value.
template <typename Key>
inline int percentile_cover_count(const std::map<Key, int64_t>& freq, int64_t total, int percent) {
    std::vector<std::pair<Key, int64_t>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    int64_t cum = 0;
    int k = 0;
    for (const auto& [value, count] : items) {
        cum += count;
        ++k;
        if (cum * 100 >= static_cast<int64_t>(percent) * total) return k;
    }
    return k;  // unreachable for percent <= 100 with non-empty freq
}

// ---------------------------------------------------------------------------
// Feature operations
// ---------------------------------------------------------------------------

// Number of distinct (rounded) bytes-per-packet ratios needed to cover the
// given percentile of flows. Small counts are the bot signature.
inline int dominant_ratio_count(const HostTrafficView& view, int percentile) {
    if (view.flows.empty()) throw DataError("dominant_ratio_count: empty view");
    std::map<int64_t, int64_t> freq;
    for (const FlowRecord& r : view.flows) freq[ratio_centi(r)] += 1;
    return percentile_cover_count(freq, static_cast<int64_t>(view.flows.size()), percentile);
}

struct RunLengthSummary {
    std::vector<std::pair<double, int>> runs;  // (rounded ratio, streak length)
    int max_run = 0;
};

// Streaks of equal rounded ratio over the time-ordered flow sequence.
inline RunLengthSummary run_lengths(const HostTrafficView& view) {
    if (view.flows.empty()) throw DataError("run_lengths: empty view");
    RunLengthSummary out;
    int64_t current = ratio_centi(view.flows.front());
    int length = 0;
    for (const FlowRecord& r : view.flows) {
        int64_t c = ratio_centi(r);
        if (c == current) {
            ++length;
        } else {
            out.runs.emplace_back(centi_to_double(current), length);
            current = c;
            length = 1;
        }
    }
    out.runs.emplace_back(centi_to_double(current), length);
    for (const auto& [_, len] : out.runs) out.max_run = std::max(out.max_run, len);
    return out;
}

// Cover count over the flow-count values of non-empty bins.
inline int dominant_flow_count(const BinnedCounts& bins, int percentile = 90) {
    std::map<uint64_t, int64_t> freq;
    int64_t non_empty = 0;
    for (const auto& bin : bins.bins) {
        if (bin.flow_count > 0) {
            freq[bin.flow_count] += 1;
            ++non_empty;
        }
    }
    if (non_empty == 0) throw DataError("dominant_flow_count: all bins empty");
    return percentile_cover_count(freq, non_empty, percentile);
}

struct InterarrivalStats {
    double time_gap_mean_ms = 0.0;
    double sd_interarrival_ms = 0.0;
    double periodicity_cv = 0.0;  // sd/mean, 0 when mean is 0
};

// Gaps between start times of successive flows (time-ordered). Needs >= 2
// flows; callers map nullopt to the missing marker.
inline std::optional<InterarrivalStats> interarrival_stats(const HostTrafficView& view) {
    if (view.flows.size() < 2) return std::nullopt;
    std::vector<double> gaps;
    gaps.reserve(view.flows.size() - 1);
    for (size_t i = 0; i + 1 < view.flows.size(); ++i)
        gaps.push_back(static_cast<double>(view.flows[i + 1].start_time - view.flows[i].start_time));
    InterarrivalStats out;
    out.time_gap_mean_ms = mean_of(gaps);
    out.sd_interarrival_ms = population_sd(gaps);
    out.periodicity_cv =
        out.time_gap_mean_ms == 0.0 ? 0.0 : out.sd_interarrival_ms / out.time_gap_mean_ms;
    return out;
}

namespace detail {

// Modal value with its count; ties break toward the smaller value.
inline std::pair<uint16_t, int64_t> modal_port(const std::map<uint16_t, int64_t>& freq) {
    std::pair<uint16_t, int64_t> best{0, -1};
    for (const auto& [port, count] : freq) {
        if (count > best.second) best = {port, count};
    }
    return best;
}

}  // namespace detail

// Computes the full schema for one host view. Fields undefined for the input
// (fewer than 2 flows, no decidable initiator) carry the missing marker.
inline FeatureVector extract_features(const HostTrafficView& view, const NetworkConfig& config) {
    if (view.flows.empty()) throw DataError("extract_features: empty view");
    const size_t n = view.flows.size();
    FeatureVector fv;

    double total_bytes = 0.0, total_packets = 0.0;
    std::vector<double> ratios, durations, packet_counts;
    ratios.reserve(n);
    durations.reserve(n);
    packet_counts.reserve(n);
    std::map<uint16_t, int64_t> host_ports, device_ports;
    int64_t decidable = 0, device_initiated = 0;
    for (const FlowRecord& r : view.flows) {
        total_bytes += static_cast<double>(r.bytes);
        total_packets += static_cast<double>(r.packets);
        ratios.push_back(static_cast<double>(r.bytes) / static_cast<double>(r.packets));
        durations.push_back(static_cast<double>(r.end_time - r.start_time));
        packet_counts.push_back(static_cast<double>(r.packets));
        bool host_is_src = r.src_ip == view.host_ip;
        host_ports[host_is_src ? r.src_port : r.dst_port] += 1;
        device_ports[host_is_src ? r.dst_port : r.src_port] += 1;
        Initiator who = infer_initiator(r, config);
        if (who != Initiator::Unknown) {
            ++decidable;
            if (who == Initiator::Device) ++device_initiated;
        }
    }

    fv[kTotalBytes] = total_bytes;
    fv[kTotalPackets] = total_packets;
    fv[kAvgBytesPerPacket] = mean_of(ratios);
    fv[kDominantRatioCount90] = dominant_ratio_count(view, 90);
    fv[kDominantRatioCount75] = dominant_ratio_count(view, 75);
    fv[kDominantRatioCount65] = dominant_ratio_count(view, 65);
    fv[kPacketsPerFlow] = total_packets / static_cast<double>(n);
    fv[kBytesPerFlow] = total_bytes / static_cast<double>(n);
    {
        std::vector<double> sorted_ratios = ratios;
        std::sort(sorted_ratios.begin(), sorted_ratios.end());
        fv[kIqrRatio] =
            quantile_lower(sorted_ratios, 3, 4) - quantile_lower(sorted_ratios, 1, 4);
    }
    fv[kSdRatio] = population_sd(ratios);

    BinnedCounts bins = bin_flows(view);
    fv[kDominantFlowCount90] = dominant_flow_count(bins, 90);

    double total_dur = 0.0;
    for (double d : durations) total_dur += d;
    fv[kTotalDurationMs] = total_dur;
    fv[kDurMaxMs] = *std::max_element(durations.begin(), durations.end());
    fv[kDurMedMs] = median_lower(durations);

    auto [sport, sport_count] = detail::modal_port(host_ports);
    auto [dport, dport_count] = detail::modal_port(device_ports);
    fv[kDominantSport] = sport;
    fv[kDominantDport] = dport;
    fv[kDominantSportCount] = static_cast<double>(sport_count);
    fv[kDominantDportCount] = static_cast<double>(dport_count);

    fv[kFlowFrequency] = static_cast<double>(n);

    {
        std::vector<double> counts;
        for (const auto& bin : bins.bins)
            if (bin.flow_count > 0) counts.push_back(static_cast<double>(bin.flow_count));
        fv[kCtMax] = *std::max_element(counts.begin(), counts.end());
        fv[kCtMed] = median_lower(counts);
    }

    fv[kInitiatorDeviceFraction] =
        decidable == 0 ? missing_value()
                       : static_cast<double>(device_initiated) / static_cast<double>(decidable);

    fv[kUniqueDeviceCount] = static_cast<double>(view.device_ips.size());

    if (auto ia = interarrival_stats(view)) {
        fv[kPeriodicityCv] = ia->periodicity_cv;
        fv[kTimeGapMeanMs] = ia->time_gap_mean_ms;
        fv[kSdInterarrivalMs] = ia->sd_interarrival_ms;
    } else {
        fv[kPeriodicityCv] = missing_value();
        fv[kTimeGapMeanMs] = missing_value();
        fv[kSdInterarrivalMs] = missing_value();
    }
    fv[kSdPackets] = population_sd(packet_counts);

    return fv;
}

// ---------------------------------------------------------------------------
// Feature CSV (host_ip, label, then the schema fields; missing = empty cell)
// ---------------------------------------------------------------------------

inline std::string feature_csv_header() {
    std::string out = "host_ip,label";
    for (const char* name : feature_names()) {
        out += ',';
        out += name;
    }
    return out;
}

inline std::string feature_csv_row(const FeatureRow& row) {
    std::string out = row.host_ip + "," + row.label;
    for (double v : row.fv.values) {
        out += ',';
        if (!is_missing(v)) out += fmt_double(v);
    }
    return out;
}

inline std::string feature_csv(const std::vector<FeatureRow>& rows) {
    std::string out = feature_csv_header();
    out += '\n';
    for (const auto& row : rows) {
        out += feature_csv_row(row);
        out += '\n';
    }
    return out;
}

inline std::vector<FeatureRow> parse_feature_csv(const std::string& content) {
    std::vector<FeatureRow> rows;
    size_t pos = 0;
    bool first = true;
    size_t line_no = 0;
    while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        std::string_view line(content.data() + pos, (eol == std::string::npos ? content.size() : eol) - pos);
        pos = eol == std::string::npos ? content.size() : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        if (first) {
            first = false;
            if (std::string(line) != feature_csv_header())
                throw SchemaError("feature file header does not match schema v" +
                                  std::to_string(kFeatureSchemaVersion));
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != 2 + kFeatureCount)
            throw SchemaError("feature file line " + std::to_string(line_no) + ": expected " +
                              std::to_string(2 + kFeatureCount) + " fields");
        FeatureRow row;
        row.host_ip = std::string(fields[0]);
        row.label = std::string(fields[1]);
        for (int i = 0; i < kFeatureCount; ++i) {
            std::string_view cell = trim(fields[static_cast<size_t>(i) + 2]);
            if (cell.empty()) {
                row.fv[i] = missing_value();
            } else if (!parse_double(cell, row.fv[i])) {
                throw SchemaError("feature file line " + std::to_string(line_no) +
                                  ": bad number in column " + feature_names()[static_cast<size_t>(i)]);
            }
        }
        rows.push_back(std::move(row));
    }
    if (first) throw SchemaError("feature file is empty");
    return rows;
}

inline std::vector<FeatureRow> read_feature_csv(const std::string& path) {
    return parse_feature_csv(read_file(path));
}

// ---------------------------------------------------------------------------
// Time-series matrix export: one row per host, 2 + 288*3 columns
// ---------------------------------------------------------------------------

inline std::string timeseries_csv_header() {
    std::string out = "host_ip,label";
    for (int b = 0; b < kBinsPerDay; ++b) {
        std::string sfx = std::to_string(b);
        out += ",bin" + sfx + "_flows,bin" + sfx + "_packets,bin" + sfx + "_bytes";
    }
    return out;
}

// label_of may return empty; empty labels are written as "unknown".
template <typename LabelFn>
inline std::string export_timeseries_matrix(const std::vector<HostTrafficView>& views,
                                            LabelFn&& label_of) {
    std::string out = timeseries_csv_header();
    out += '\n';
    for (const auto& view : views) {
        BinnedCounts bins = bin_flows(view);
        std::string label = label_of(view.host_ip);
        if (label.empty()) label = kUnknownLabel;
        out += format_ipv4(view.host_ip);
        out += ',';
        out += label;
        for (const auto& bin : bins.bins) {
            out += ',';
            out += std::to_string(bin.flow_count);
            out += ',';
            out += std::to_string(bin.packet_sum);
            out += ',';
            out += std::to_string(bin.byte_sum);
        }
        out += '\n';
    }
    return out;
}

}  // namespace botdet
