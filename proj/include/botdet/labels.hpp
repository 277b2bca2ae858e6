#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "botdet/features.hpp"
#include "botdet/rng.hpp"

namespace botdet {

// ---------------------------------------------------------------------------
// Blacklists and labeled datasets
// ---------------------------------------------------------------------------

struct LabelSet {
    std::map<Ipv4, std::string> entries;  // ip -> family name
    std::string source;
    int64_t loaded_at = 0;

    std::optional<std::string> family_of(Ipv4 ip) const {
        auto it = entries.find(ip);
        if (it == entries.end()) return std::nullopt;
        return it->second;
    }
};

// CSV of (ip, family). Duplicate addresses resolve first-wins with a warning.
inline LabelSet parse_blacklist(const std::string& content, const std::string& source,
                                std::vector<std::string>* warnings = nullptr) {
    LabelSet out;
    out.source = source;
    size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
        size_t eol = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (eol == std::string::npos ? content.size() : eol) - pos);
        pos = eol == std::string::npos ? content.size() : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 2)
            throw DataError(source + " line " + std::to_string(line_no) + ": expected ip,family");
        Ipv4 ip;
        if (!parse_ipv4(fields[0], ip))
            throw DataError(source + " line " + std::to_string(line_no) + ": invalid ip");
        std::string family(trim(fields[1]));
        if (family.empty())
            throw DataError(source + " line " + std::to_string(line_no) + ": empty family name");
        auto [it, inserted] = out.entries.emplace(ip, family);
        if (!inserted && warnings)
            warnings->push_back(source + " line " + std::to_string(line_no) + ": duplicate ip " +
                                format_ipv4(ip) + ", keeping first entry (" + it->second + ")");
    }
    return out;
}

inline LabelSet load_blacklist(const std::string& path, std::vector<std::string>* warnings = nullptr) {
    LabelSet set = parse_blacklist(read_file(path), path, warnings);
    set.loaded_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
    return set;
}

struct LabeledDataset {
    int schema_version = kFeatureSchemaVersion;
    std::vector<FeatureRow> rows;
};

inline bool is_malicious_label(const std::string& label) {
    return !label.empty() && label != kUnknownLabel;
}

// Re-labels rows from the union of the given label sets (first set wins on
// conflicts). Idempotent for a fixed set of lists.
inline void apply_labels(std::vector<FeatureRow>& rows, const std::vector<LabelSet>& lists) {
    for (auto& row : rows) {
        Ipv4 ip;
        if (!parse_ipv4(row.host_ip, ip)) continue;
        row.label = kUnknownLabel;
        for (const auto& list : lists) {
            if (auto fam = list.family_of(ip)) {
                row.label = *fam;
                break;
            }
        }
    }
}

// Every malicious row from every day, plus up to unknown_per_day unknown rows
// sampled per day without replacement; output order is a seeded shuffle.
inline LabeledDataset build_training_set(const std::vector<LabeledDataset>& days,
                                         size_t unknown_per_day, uint64_t seed) {
    if (days.empty()) throw DataError("build_training_set: no input days");
    LabeledDataset out;
    Rng rng(derive_stream(seed, 0xba1a9ce));
    size_t malicious = 0;
    for (const auto& day : days) {
        std::vector<size_t> unknown_idx;
        for (size_t i = 0; i < day.rows.size(); ++i) {
            if (is_malicious_label(day.rows[i].label)) {
                out.rows.push_back(day.rows[i]);
                ++malicious;
            } else {
                unknown_idx.push_back(i);
            }
        }
        // partial Fisher-Yates: first k entries are a uniform sample
        size_t k = std::min(unknown_per_day, unknown_idx.size());
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(rng.uniform_int(unknown_idx.size() - i));
            std::swap(unknown_idx[i], unknown_idx[j]);
            out.rows.push_back(day.rows[unknown_idx[i]]);
        }
    }
    if (malicious == 0) throw DataError("build_training_set: no malicious rows in any input day");
    rng.shuffle(out.rows);
    return out;
}

// ---------------------------------------------------------------------------
// Matching predictions back to blacklists
// ---------------------------------------------------------------------------

struct HostScore {
    Ipv4 ip;
    double score = 0.0;
};

struct MatchEntry {
    Ipv4 ip;
    double score = 0.0;
    std::vector<std::string> matched_sources;
    std::vector<std::string> families;
    bool matched() const { return !matched_sources.empty(); }
};

struct MatchReport {
    std::vector<MatchEntry> entries;  // one per prediction, input order
    size_t n_predictions = 0;
    size_t n_matched = 0;
    double match_rate = 0.0;
    std::optional<double> median_matched_score;
};

inline MatchReport match_predictions(const std::vector<HostScore>& predictions,
                                     const std::vector<LabelSet>& lists) {
    MatchReport report;
    report.n_predictions = predictions.size();
    std::vector<double> matched_scores;
    for (const auto& p : predictions) {
        MatchEntry e;
        e.ip = p.ip;
        e.score = p.score;
        for (const auto& list : lists) {
            if (auto fam = list.family_of(p.ip)) {
                e.matched_sources.push_back(list.source);
                e.families.push_back(*fam);
            }
        }
        if (e.matched()) {
            ++report.n_matched;
            matched_scores.push_back(p.score);
        }
        report.entries.push_back(std::move(e));
    }
    report.match_rate = predictions.empty()
                            ? 0.0
                            : static_cast<double>(report.n_matched) /
                                  static_cast<double>(report.n_predictions);
    if (!matched_scores.empty()) report.median_matched_score = median_lower(matched_scores);
    return report;
}

}  // namespace botdet
