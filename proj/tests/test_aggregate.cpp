#include <catch2/catch_amalgamated.hpp>

#include "botdet/aggregate.hpp"
#include "test_support.hpp"

using namespace botdet;
using testsup::dev_flow;
using testsup::ip;
using testsup::kDayStart;

TEST_CASE("grouping partitions flows by external host") {
    NetworkConfig config = testsup::test_config();
    Ipv4 host_a = ip(93, 184, 216, 34);
    Ipv4 host_b = ip(93, 184, 216, 35);
    std::vector<FlowRecord> records;
    for (int i = 0; i < 3; ++i) records.push_back(dev_flow(1, host_a, 1000, 5, i * 1000));
    for (int i = 0; i < 2; ++i) records.push_back(dev_flow(1, host_b, 1000, 5, i * 1000));

    GroupResult g = group_by_external_host(records, config);
    REQUIRE(g.views.size() == 2);
    CHECK(g.views[0].host_ip == host_a);
    CHECK(g.views[0].flows.size() == 3);
    CHECK(g.views[1].host_ip == host_b);
    CHECK(g.views[1].flows.size() == 2);
    CHECK(g.discards.empty());
}

TEST_CASE("flows without exactly one external endpoint are discarded, views stay windowed") {
    NetworkConfig config = testsup::test_config();
    std::vector<FlowRecord> records;
    records.push_back(dev_flow(1, ip(93, 184, 216, 34), 1000, 5, 0));
    {
        testsup::FlowSpec s;  // internal <-> internal
        s.src = ip(10, 0, 0, 1);
        s.dst = ip(10, 0, 0, 2);
        records.push_back(testsup::make_flow(s));
    }
    {
        testsup::FlowSpec s;  // external <-> external
        s.src = ip(93, 1, 1, 1);
        s.dst = ip(94, 1, 1, 1);
        records.push_back(testsup::make_flow(s));
    }
    records.push_back(dev_flow(1, ip(93, 184, 216, 34), 1000, 5, kMsPerDay + 5));  // next day

    GroupResult g = group_by_external_host(records, config);
    REQUIRE(g.views.size() == 1);
    CHECK(g.views[0].flows.size() == 1);
    REQUIRE(g.discards.size() == 3);
    CHECK(g.discards[0].reason == "internal_to_internal");
    CHECK(g.discards[1].reason == "external_to_external");
    CHECK(g.discards[2].reason == "outside_window");
}

TEST_CASE("device set covers every distinct internal endpoint") {
    NetworkConfig config = testsup::test_config();
    Ipv4 host = ip(93, 184, 216, 34);
    std::vector<FlowRecord> records;
    for (int i = 0; i < 612; ++i) {
        testsup::FlowSpec s;
        s.src = ip(10, 0, i / 250, i % 250 + 1);
        s.dst = host;
        s.start_off = i;
        records.push_back(testsup::make_flow(s));
    }
    GroupResult g = group_by_external_host(records, config);
    REQUIRE(g.views.size() == 1);
    CHECK(g.views[0].device_ips.size() == 612);
}

TEST_CASE("partition property over random record sets") {
    NetworkConfig config = testsup::test_config();
    Rng rng(77001);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<FlowRecord> records;
        int n_hosts = 1 + static_cast<int>(rng.uniform_int(4));
        for (int h = 0; h < n_hosts; ++h) {
            auto batch = testsup::random_view_records(rng, 6, config);
            records.insert(records.end(), batch.begin(), batch.end());
        }
        // sprinkle undirectable flows
        for (int i = 0; i < 3; ++i) {
            testsup::FlowSpec s;
            s.src = ip(10, 0, 0, 1);
            s.dst = ip(10, 0, 0, 2);
            records.push_back(testsup::make_flow(s));
        }
        GroupResult g = group_by_external_host(records, config);
        size_t in_views = 0;
        for (const auto& v : g.views) in_views += v.flows.size();
        CHECK(in_views + g.discards.size() == records.size());
        for (const auto& v : g.views) {
            for (const auto& f : v.flows) {
                bool src_is_host = f.src_ip == v.host_ip;
                CHECK((src_is_host ? f.dst_ip : f.src_ip) != v.host_ip);
                CHECK(f.start_time >= v.window_start);
                CHECK(f.start_time < v.window_end);
            }
            CHECK(std::is_sorted(v.flows.begin(), v.flows.end(),
                                 [](const auto& a, const auto& b) { return a.start_time < b.start_time; }));
        }
    }
}

TEST_CASE("binning aligns to day start with half-open bins") {
    NetworkConfig config = testsup::test_config();
    Ipv4 host = ip(93, 184, 216, 34);

    SECTION("flow at day start lands in bin 0") {
        auto view = testsup::single_view({dev_flow(1, host, 1000, 5, 0)}, config);
        BinnedCounts b = bin_flows(view);
        CHECK(b.bins[0].flow_count == 1);
        CHECK(b.bins[0].packet_sum == 5);
        CHECK(b.bins[0].byte_sum == 1000);
        uint64_t total = 0;
        for (const auto& bin : b.bins) total += bin.flow_count;
        CHECK(total == 1);
    }
    SECTION("+299s stays in bin 0, +300s rolls to bin 1") {
        auto view = testsup::single_view(
            {dev_flow(1, host, 1000, 5, 299000), dev_flow(2, host, 1000, 5, 300000)}, config);
        BinnedCounts b = bin_flows(view);
        CHECK(b.bins[0].flow_count == 1);
        CHECK(b.bins[1].flow_count == 1);
    }
    SECTION("one flow per bin fills all 288") {
        std::vector<FlowRecord> records;
        for (int i = 0; i < kBinsPerDay; ++i)
            records.push_back(dev_flow(1, host, 100, 1, static_cast<int64_t>(i) * kBinMs));
        auto view = testsup::single_view(records, config);
        BinnedCounts b = bin_flows(view);
        for (const auto& bin : b.bins) CHECK(bin.flow_count == 1);
    }
}

TEST_CASE("binning conservation over random views") {
    NetworkConfig config = testsup::test_config();
    Rng rng(88002);
    for (int iter = 0; iter < 300; ++iter) {
        auto records = testsup::random_view_records(rng, 40, config);
        auto view = testsup::single_view(records, config);
        BinnedCounts b = bin_flows(view);
        uint64_t flows = 0, packets = 0, bytes = 0;
        for (const auto& bin : b.bins) {
            flows += bin.flow_count;
            packets += bin.packet_sum;
            bytes += bin.byte_sum;
        }
        uint64_t want_packets = 0, want_bytes = 0;
        for (const auto& f : view.flows) {
            want_packets += f.packets;
            want_bytes += f.bytes;
        }
        CHECK(flows == view.flows.size());
        CHECK(packets == want_packets);
        CHECK(bytes == want_bytes);
    }
}

TEST_CASE("initiator port rule") {
    NetworkConfig config = testsup::test_config();
    Ipv4 device = ip(10, 0, 0, 5);
    Ipv4 host = ip(93, 184, 216, 34);

    SECTION("device ephemeral to host well-known: device initiated") {
        testsup::FlowSpec s;
        s.src = device;
        s.sport = 49152;
        s.dst = host;
        s.dport = 443;
        CHECK(infer_initiator(testsup::make_flow(s), config) == Initiator::Device);
    }
    SECTION("host ephemeral to device well-known: host initiated") {
        testsup::FlowSpec s;
        s.src = host;
        s.sport = 49152;
        s.dst = device;
        s.dport = 80;
        CHECK(infer_initiator(testsup::make_flow(s), config) == Initiator::Host);
    }
    SECTION("no well-known port on either side: unknown") {
        testsup::FlowSpec s;
        s.src = device;
        s.sport = 50000;
        s.dst = host;
        s.dport = 50001;
        CHECK(infer_initiator(testsup::make_flow(s), config) == Initiator::Unknown);
    }
}

TEST_CASE("initiator flips when the port pairing is mirrored") {
    NetworkConfig config = testsup::test_config();
    Rng rng(99003);
    for (int iter = 0; iter < 1000; ++iter) {
        auto records = testsup::random_view_records(rng, 1, config);
        const FlowRecord& f = records[0];
        // mirror: same endpoints, ports exchanged across the sides
        FlowRecord m = f;
        std::swap(m.src_port, m.dst_port);
        Initiator a = infer_initiator(f, config);
        Initiator b = infer_initiator(m, config);
        if (a == Initiator::Device) CHECK(b == Initiator::Host);
        if (a == Initiator::Host) CHECK(b == Initiator::Device);
        if (a == Initiator::Unknown) CHECK(b == Initiator::Unknown);
    }
}
