#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>

#include "botdet/features.hpp"
#include "oracle.hpp"
#include "test_support.hpp"

using namespace botdet;
using testsup::dev_flow;
using testsup::ip;

namespace {

bool same_bits(double a, double b) {
    return std::bit_cast<uint64_t>(a) == std::bit_cast<uint64_t>(b);
}

bool fv_equal_bits(const FeatureVector& a, const FeatureVector& b, int* bad_field = nullptr) {
    for (int i = 0; i < kFeatureCount; ++i) {
        if (!same_bits(a[i], b[i])) {
            if (bad_field) *bad_field = i;
            return false;
        }
    }
    return true;
}

const Ipv4 kHost = ip(93, 184, 216, 34);

}  // namespace

TEST_CASE("dominant ratio count: two ratios dominate the 90th percentile") {
    NetworkConfig config = testsup::test_config();
    std::vector<FlowRecord> records;
    // 8 flows at ratio 411/4 = 102.75, 2 at 392/4 = 98
    for (int i = 0; i < 8; ++i) records.push_back(dev_flow(1, kHost, 411, 4, i * 1000));
    for (int i = 0; i < 2; ++i) records.push_back(dev_flow(1, kHost, 392, 4, 8000 + i * 1000));
    auto view = testsup::single_view(records, config);
    CHECK(dominant_ratio_count(view, 90) == 2);  // 102.75 covers 80%, adding 98 reaches 100%
    CHECK(dominant_ratio_count(view, 75) == 1);
}

TEST_CASE("dominant ratio count edge shapes") {
    NetworkConfig config = testsup::test_config();

    SECTION("all flows share one ratio") {
        std::vector<FlowRecord> records;
        for (int i = 0; i < 10; ++i) records.push_back(dev_flow(1, kHost, 640, 10, i * 1000));
        auto view = testsup::single_view(records, config);
        CHECK(dominant_ratio_count(view, 90) == 1);
        CHECK(dominant_ratio_count(view, 65) == 1);
    }
    SECTION("ten distinct ratios need nine values at the 90th percentile") {
        std::vector<FlowRecord> records;
        for (int i = 1; i <= 10; ++i)
            records.push_back(dev_flow(1, kHost, static_cast<uint64_t>(10 * i), 1, i * 1000));
        auto view = testsup::single_view(records, config);
        // frozen from the brute-force cover: 9 of 10 singleton ratios reach 90%
        CHECK(dominant_ratio_count(view, 90) == 9);
        std::map<int64_t, int64_t> freq;
        for (const auto& f : view.flows) freq[ratio_centi(f)] += 1;
        std::vector<int64_t> counts;
        for (auto& [_, c] : freq) counts.push_back(c);
        CHECK(oracle::cover_count(counts, 10, 90) == 9);
    }
    SECTION("empty view throws") {
        HostTrafficView view;
        CHECK_THROWS_AS(dominant_ratio_count(view, 90), DataError);
    }
}

TEST_CASE("dominant ratio count is monotone in the percentile") {
    NetworkConfig config = testsup::test_config();
    Rng rng(31300);
    for (int iter = 0; iter < 500; ++iter) {
        auto view = testsup::single_view(testsup::random_view_records(rng, 20, config), config);
        int c65 = dominant_ratio_count(view, 65);
        int c75 = dominant_ratio_count(view, 75);
        int c90 = dominant_ratio_count(view, 90);
        CHECK(c65 <= c75);
        CHECK(c75 <= c90);
    }
}

TEST_CASE("run lengths over the time-ordered ratio sequence") {
    NetworkConfig config = testsup::test_config();

    SECTION("streaks split exactly at value changes") {
        // ratio sequence 5,5,5,7,5,5 via packets=1
        std::vector<uint64_t> bytes = {5, 5, 5, 7, 5, 5};
        std::vector<FlowRecord> records;
        for (size_t i = 0; i < bytes.size(); ++i)
            records.push_back(dev_flow(1, kHost, bytes[i], 1, static_cast<int64_t>(i) * 1000));
        auto view = testsup::single_view(records, config);
        RunLengthSummary s = run_lengths(view);
        REQUIRE(s.runs.size() == 3);
        CHECK(s.runs[0] == std::pair<double, int>{5.0, 3});
        CHECK(s.runs[1] == std::pair<double, int>{7.0, 1});
        CHECK(s.runs[2] == std::pair<double, int>{5.0, 2});
        CHECK(s.max_run == 3);
    }
    SECTION("single flow is one run of length one") {
        auto view = testsup::single_view({dev_flow(1, kHost, 100, 2, 0)}, config);
        RunLengthSummary s = run_lengths(view);
        REQUIRE(s.runs.size() == 1);
        CHECK(s.runs[0].second == 1);
        CHECK(s.max_run == 1);
    }
    SECTION("identical ratios collapse to one run") {
        std::vector<FlowRecord> records;
        for (int i = 0; i < 17; ++i) records.push_back(dev_flow(1, kHost, 500, 5, i * 1000));
        auto view = testsup::single_view(records, config);
        RunLengthSummary s = run_lengths(view);
        REQUIRE(s.runs.size() == 1);
        CHECK(s.max_run == 17);
        // lengths sum to the flow count
        int total = 0;
        for (auto& [_, len] : s.runs) total += len;
        CHECK(total == 17);
    }
}

TEST_CASE("dominant flow count over non-empty bins") {
    NetworkConfig config = testsup::test_config();

    SECTION("nine bins of one plus a bin of seven") {
        std::vector<FlowRecord> records;
        for (int b = 0; b < 9; ++b) records.push_back(dev_flow(1, kHost, 100, 1, b * kBinMs));
        for (int i = 0; i < 7; ++i) records.push_back(dev_flow(1, kHost, 100, 1, 9 * kBinMs + i));
        auto view = testsup::single_view(records, config);
        CHECK(dominant_flow_count(bin_flows(view), 90) == 1);  // count 1 covers 9/10 bins
    }
    SECTION("uniformly distinct counts over ten bins") {
        std::vector<FlowRecord> records;
        for (int b = 0; b < 10; ++b)
            for (int i = 0; i <= b; ++i)
                records.push_back(dev_flow(1, kHost, 100, 1, b * kBinMs + i));
        auto view = testsup::single_view(records, config);
        CHECK(dominant_flow_count(bin_flows(view), 90) == 9);  // brute-force cover oracle value
    }
    SECTION("all non-empty bins share one count") {
        std::vector<FlowRecord> records;
        for (int b = 0; b < 5; ++b) records.push_back(dev_flow(1, kHost, 100, 1, b * kBinMs));
        auto view = testsup::single_view(records, config);
        CHECK(dominant_flow_count(bin_flows(view), 90) == 1);
    }
    SECTION("no flows means no non-empty bins") {
        BinnedCounts empty;
        CHECK_THROWS_AS(dominant_flow_count(empty, 90), DataError);
    }
}

TEST_CASE("interarrival statistics") {
    NetworkConfig config = testsup::test_config();

    SECTION("perfect beacon has zero spread") {
        std::vector<FlowRecord> records;
        for (int i = 0; i < 4; ++i) records.push_back(dev_flow(1, kHost, 100, 1, i * 1000));
        auto view = testsup::single_view(records, config);
        auto ia = interarrival_stats(view);
        REQUIRE(ia.has_value());
        CHECK(ia->time_gap_mean_ms == 1000.0);
        CHECK(ia->sd_interarrival_ms == 0.0);
        CHECK(ia->periodicity_cv == 0.0);
    }
    SECTION("hand-computed spread, cross-checked by the oracle") {
        auto view = testsup::single_view({dev_flow(1, kHost, 100, 1, 0), dev_flow(1, kHost, 100, 1, 1000),
                                          dev_flow(1, kHost, 100, 1, 11000)},
                                         config);
        auto ia = interarrival_stats(view);
        REQUIRE(ia.has_value());
        CHECK(ia->time_gap_mean_ms == 5500.0);
        CHECK(ia->sd_interarrival_ms == 4500.0);
        CHECK(ia->periodicity_cv == Catch::Approx(9.0 / 11.0).epsilon(1e-12));
        FeatureVector brute = oracle::features(view, config);
        CHECK(brute[kTimeGapMeanMs] == 5500.0);
        CHECK(brute[kSdInterarrivalMs] == 4500.0);
    }
    SECTION("fewer than two flows has no gaps") {
        auto view = testsup::single_view({dev_flow(1, kHost, 100, 1, 0)}, config);
        CHECK_FALSE(interarrival_stats(view).has_value());
    }
    SECTION("all flows at the same instant: cv defined as 0") {
        auto view = testsup::single_view({dev_flow(1, kHost, 100, 1, 5), dev_flow(2, kHost, 100, 1, 5)},
                                         config);
        auto ia = interarrival_stats(view);
        REQUIRE(ia.has_value());
        CHECK(ia->time_gap_mean_ms == 0.0);
        CHECK(ia->periodicity_cv == 0.0);
    }
}

TEST_CASE("extract_features realizes the bot-side medians exactly") {
    NetworkConfig config = testsup::test_config();
    auto view = testsup::single_view(
        {dev_flow(1, kHost, 1000, 5, 0), dev_flow(2, kHost, 1000, 5, 1000)}, config);
    FeatureVector fv = extract_features(view, config);
    CHECK(fv[kPacketsPerFlow] == 5.0);
    CHECK(fv[kBytesPerFlow] == 1000.0);
    CHECK(fv[kSdPackets] == 0.0);
    CHECK(fv[kSdRatio] == 0.0);
    CHECK(fv[kTotalBytes] == 2000.0);
    CHECK(fv[kTotalPackets] == 10.0);
    CHECK(fv[kUniqueDeviceCount] == 2.0);
    CHECK(fv[kDominantSport] == 443.0);
    CHECK(fv[kDominantSportCount] == 2.0);
    CHECK(fv[kInitiatorDeviceFraction] == 1.0);
    CHECK(fv[kFlowFrequency] == 2.0);
}

TEST_CASE("single-flow view: durations defined, interarrival missing") {
    NetworkConfig config = testsup::test_config();
    auto view = testsup::single_view({dev_flow(1, kHost, 1000, 5, 0, 250)}, config);
    FeatureVector fv = extract_features(view, config);
    CHECK(fv[kTotalDurationMs] == 250.0);
    CHECK(fv[kDurMaxMs] == 250.0);
    CHECK(fv[kDurMedMs] == 250.0);
    CHECK(is_missing(fv[kPeriodicityCv]));
    CHECK(is_missing(fv[kTimeGapMeanMs]));
    CHECK(is_missing(fv[kSdInterarrivalMs]));
    CHECK(fv[kSdPackets] == 0.0);
    CHECK_FALSE(is_missing(fv[kInitiatorDeviceFraction]));
}

TEST_CASE("initiator fraction missing when no flow is decidable") {
    NetworkConfig config = testsup::test_config();
    testsup::FlowSpec s;
    s.src = ip(10, 0, 0, 1);
    s.sport = 50000;
    s.dst = kHost;
    s.dport = 50001;
    auto view = testsup::single_view({testsup::make_flow(s)}, config);
    FeatureVector fv = extract_features(view, config);
    CHECK(is_missing(fv[kInitiatorDeviceFraction]));
}

TEST_CASE("empty view is rejected") {
    NetworkConfig config = testsup::test_config();
    HostTrafficView view;
    CHECK_THROWS_AS(extract_features(view, config), DataError);
}

TEST_CASE("feature extraction is permutation-safe") {
    NetworkConfig config = testsup::test_config();
    Rng rng(51500);
    for (int iter = 0; iter < 200; ++iter) {
        auto records = testsup::random_view_records(rng, 15, config);
        auto base_view = testsup::single_view(records, config);
        FeatureVector base = extract_features(base_view, config);
        rng.shuffle(records);
        auto shuffled_view = testsup::single_view(records, config);
        FeatureVector shuffled = extract_features(shuffled_view, config);
        int bad = -1;
        bool equal = fv_equal_bits(base, shuffled, &bad);
        if (!equal) INFO("field " << feature_names()[static_cast<size_t>(bad)]);
        CHECK(equal);
    }
}

TEST_CASE("doubling bytes scales size features and preserves count/time features") {
    NetworkConfig config = testsup::test_config();
    Rng rng(61600);
    for (int iter = 0; iter < 200; ++iter) {
        // ratios exactly representable in hundredths: packets multiple of 4
        std::vector<FlowRecord> records;
        int n = 1 + static_cast<int>(rng.uniform_int(10));
        for (int i = 0; i < n; ++i) {
            uint64_t packets = 4 * (1 + rng.uniform_int(8));
            uint64_t quarter_ratio = 1 + rng.uniform_int(2000);  // ratio = k/4
            records.push_back(dev_flow(1 + static_cast<int>(rng.uniform_int(5)), kHost,
                                       packets * quarter_ratio / 4, packets,
                                       static_cast<int64_t>(rng.uniform_int(kMsPerDay))));
        }
        auto view = testsup::single_view(records, config);
        FeatureVector base = extract_features(view, config);

        for (auto& r : records) r.bytes *= 2;
        auto doubled_view = testsup::single_view(records, config);
        FeatureVector doubled = extract_features(doubled_view, config);

        CHECK(doubled[kTotalBytes] == 2.0 * base[kTotalBytes]);
        CHECK(doubled[kBytesPerFlow] == 2.0 * base[kBytesPerFlow]);
        CHECK(doubled[kAvgBytesPerPacket] == 2.0 * base[kAvgBytesPerPacket]);
        for (int f : {kTotalPackets, kDominantRatioCount90, kDominantRatioCount75,
                      kDominantRatioCount65, kPacketsPerFlow, kDominantFlowCount90, kTotalDurationMs,
                      kDurMaxMs, kDurMedMs, kDominantSport, kDominantDport, kFlowFrequency, kCtMax,
                      kCtMed, kInitiatorDeviceFraction, kDominantSportCount, kDominantDportCount,
                      kUniqueDeviceCount, kPeriodicityCv, kTimeGapMeanMs, kSdPackets,
                      kSdInterarrivalMs})
            CHECK(same_bits(doubled[f], base[f]));
    }
}

TEST_CASE("every feature matches the brute-force oracle bit for bit") {
    NetworkConfig config = testsup::test_config();
    Rng rng(71700);
    for (int iter = 0; iter < 200; ++iter) {
        auto view = testsup::single_view(testsup::random_view_records(rng, 10, config), config);
        FeatureVector impl = extract_features(view, config);
        FeatureVector brute = oracle::features(view, config);
        int bad = -1;
        bool equal = fv_equal_bits(impl, brute, &bad);
        if (!equal)
            INFO("field " << feature_names()[static_cast<size_t>(bad)] << " impl=" << impl[bad]
                          << " oracle=" << brute[bad]);
        CHECK(equal);
    }
}

TEST_CASE("feature csv round-trips including missing markers") {
    NetworkConfig config = testsup::test_config();
    Rng rng(81800);
    std::vector<FeatureRow> rows;
    for (int i = 0; i < 25; ++i) {
        auto view = testsup::single_view(testsup::random_view_records(rng, 6, config), config);
        FeatureRow row;
        row.host_ip = format_ipv4(view.host_ip);
        row.label = i % 3 ? kUnknownLabel : "family_x";
        row.fv = extract_features(view, config);
        rows.push_back(std::move(row));
    }
    std::string csv = feature_csv(rows);
    auto parsed = parse_feature_csv(csv);
    REQUIRE(parsed.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].host_ip == rows[i].host_ip);
        CHECK(parsed[i].label == rows[i].label);
        CHECK(fv_equal_bits(parsed[i].fv, rows[i].fv));
    }
}

TEST_CASE("feature csv header is validated") {
    CHECK_THROWS_AS(parse_feature_csv("host_ip,label,oops\n1.2.3.4,unknown,1\n"), SchemaError);
    CHECK_THROWS_AS(parse_feature_csv(""), SchemaError);
    CHECK_NOTHROW(parse_feature_csv(feature_csv_header() + "\n"));
}

TEST_CASE("time-series matrix export") {
    NetworkConfig config = testsup::test_config();

    SECTION("one flow in bin zero") {
        GroupResult g = group_by_external_host({dev_flow(1, kHost, 1000, 5, 0)}, config);
        std::string csv = export_timeseries_matrix(g.views, [](Ipv4) { return std::string("fam"); });
        auto lines = split(csv, '\n');
        REQUIRE(lines.size() == 3);  // header, row, trailing empty
        auto header = split(lines[0], ',');
        auto row = split(lines[1], ',');
        CHECK(header.size() == 2 + 3 * kBinsPerDay);
        CHECK(row.size() == 2 + 3 * kBinsPerDay);
        CHECK(row[0] == "93.184.216.34");
        CHECK(row[1] == "fam");
        CHECK(row[2] == "1");
        CHECK(row[3] == "5");
        CHECK(row[4] == "1000");
        for (size_t i = 5; i < row.size(); ++i) CHECK(row[i] == "0");
    }
    SECTION("empty day gives header only") {
        std::string csv = export_timeseries_matrix({}, [](Ipv4) { return std::string(); });
        auto lines = split(csv, '\n');
        REQUIRE(lines.size() == 2);
        CHECK(lines[0] == timeseries_csv_header());
    }
    SECTION("per-row flow conservation on random views") {
        Rng rng(91900);
        for (int iter = 0; iter < 50; ++iter) {
            auto records = testsup::random_view_records(rng, 30, config);
            GroupResult g = group_by_external_host(records, config);
            std::string csv =
                export_timeseries_matrix(g.views, [](Ipv4) { return std::string(); });
            auto lines = split(csv, '\n');
            REQUIRE(lines.size() == g.views.size() + 2);
            for (size_t v = 0; v < g.views.size(); ++v) {
                auto row = split(lines[v + 1], ',');
                REQUIRE(row.size() == 2 + 3 * kBinsPerDay);
                uint64_t flows = 0;
                for (int b = 0; b < kBinsPerDay; ++b) {
                    uint64_t c = 0;
                    REQUIRE(parse_int(row[2 + 3 * static_cast<size_t>(b)], c));
                    flows += c;
                }
                CHECK(flows == g.views[v].flows.size());
            }
        }
    }
}
