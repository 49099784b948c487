#include <doctest.h>

#include <random>
#include <sstream>

#include "flames/error.hpp"
#include "flames/fuse.hpp"
#include "oracles.hpp"

using namespace flames;
using namespace flames::fuse;

namespace {

const MacAddress kDev = MacAddress::parse("00:11:22:33:44:55");

ApEvent assoc(Millis begin_s, int ap, std::uint32_t ip = 0x0a000001) {
    ApEvent e;
    e.user_ip = Ipv4(ip);
    e.user_mac = kDev;
    e.ap_name = "b" + std::to_string(ap) + "r1";
    e.ap_mac = MacAddress::from_u64(0x001de5000000ULL + static_cast<std::uint64_t>(ap));
    e.lease_begin = begin_s * 1000;
    e.lease_end = e.lease_begin + 3600 * 1000;
    return e;
}

Lease lease_on(std::uint32_t ip, Millis start, Millis end, std::uint64_t mac) {
    Lease l;
    l.mac = MacAddress::from_u64(mac);
    l.ip = Ipv4(ip);
    l.start = start;
    l.end = end;
    return l;
}

FlowRecord flow(std::uint32_t src, std::uint32_t dst, Millis start, Millis finish) {
    FlowRecord f;
    f.src_ip = Ipv4(src);
    f.dst_ip = Ipv4(dst);
    f.start = start;
    f.finish = finish;
    f.duration = finish - start;
    f.packet_count = 1;
    f.flow_bytes = 100;
    return f;
}

}  // namespace

TEST_SUITE("fuse") {

TEST_CASE("six associations give five leases") {
    std::vector<ApEvent> ev;
    for (int k = 0; k < 6; ++k) ev.push_back(assoc(1000 + 600 * k + k * k, k + 1));
    const auto d = derive_leases(ev);
    REQUIRE(d.leases.size() == 5);
    CHECK(d.discarded_last == 1);
    CHECK(d.leases[0].start == ev[0].lease_begin);
    CHECK(d.leases[0].end == ev[1].lease_begin);
    CHECK(d.leases[0].ap_mac == ev[0].ap_mac);
    for (std::size_t k = 0; k < 5; ++k) CHECK(d.leases[k].ap_mac == ev[k].ap_mac);
    CHECK(d.leases == oracle::leases(ev));
}

TEST_CASE("degenerate lease inputs") {
    std::vector<ApEvent> one{assoc(10, 1)};
    CHECK(derive_leases(one).leases.empty());

    std::vector<ApEvent> dup{assoc(10, 1), assoc(10, 2), assoc(20, 3)};
    const auto d = derive_leases(dup);
    REQUIRE(d.leases.size() == 1);
    CHECK(d.dropped_zero_length == 1);
    CHECK(d.leases[0].start == 10000);
    CHECK(d.leases[0].end == 20000);

    std::vector<ApEvent> unsorted{assoc(20, 1), assoc(10, 2)};
    CHECK_THROWS_AS(derive_leases(unsorted), Error);

    std::vector<ApEvent> gap{assoc(0, 1), assoc(10, 2), assoc(100000, 3), assoc(100010, 4)};
    const auto g = derive_leases(gap, {}, {.max_gap = 3600 * 1000});
    CHECK(g.leases.size() == 2);
    CHECK(g.dropped_gap == 1);
}

TEST_CASE("lease derivation matches the brute-force constructor") {
    std::mt19937_64 rng(2012);
    for (int run = 0; run < 200; ++run) {
        const int n = 1 + static_cast<int>(rng() % 12);
        std::vector<ApEvent> ev;
        Millis t = 0;
        for (int k = 0; k < n; ++k) {
            t += static_cast<Millis>(rng() % 4) * static_cast<Millis>(rng() % 5000);
            ev.push_back(assoc(t, static_cast<int>(rng() % 5), static_cast<std::uint32_t>(rng() % 3)));
        }
        const Millis cap = run % 2 ? 0 : 4000 * 1000;
        const auto got = derive_leases(ev, {}, {.max_gap = cap});
        CHECK(got.leases == oracle::leases(ev, cap));
        // disjoint and ordered
        for (std::size_t k = 1; k < got.leases.size(); ++k) CHECK(got.leases[k - 1].end <= got.leases[k].start);
    }
}

TEST_CASE("derive_all_leases groups per device") {
    std::vector<ApEvent> ev{assoc(30, 1), assoc(10, 2), assoc(20, 3)};
    auto other = assoc(15, 4);
    other.user_mac = MacAddress::parse("00:11:22:33:44:66");
    ev.push_back(other);
    const auto d = derive_all_leases(ev);
    CHECK(d.leases.size() == 2);
    CHECK(d.discarded_last == 2);
    CHECK(d.leases[0].start == 10000);
}

TEST_CASE("containment matching") {
    const std::uint32_t x = 0x0a000001, y = 0x0a000002, ext = 0x08080808;
    LeaseIndex idx({lease_on(x, 5000, 20000, 1), lease_on(y, 0, 100000, 2)});
    MatchStats st;
    auto core = match_flows(std::vector<FlowRecord>{flow(ext, x, 10000, 12000)}, idx, &st);
    REQUIRE(core.size() == 1);
    CHECK(core[0].direction == Direction::Inbound);
    CHECK(core[0].device_mac == MacAddress::from_u64(1));

    core = match_flows(std::vector<FlowRecord>{flow(ext, x, 10000, 25000)}, idx, &st);
    CHECK(core.empty());

    core = match_flows(std::vector<FlowRecord>{flow(x, y, 10000, 12000)}, idx, &st);
    REQUIRE(core.size() == 2);
    CHECK(core[0].direction == Direction::Outbound);
    CHECK(core[0].device_mac == MacAddress::from_u64(1));
    CHECK(core[1].direction == Direction::Inbound);
    CHECK(core[1].device_mac == MacAddress::from_u64(2));

    CHECK(st.total == 3);
    CHECK(st.matched == 2);
    CHECK(st.unmatched == 1);
    CHECK(st.two_sided == 1);
    CHECK(st.core_records == 3);
}

TEST_CASE("matching conservation and containment on random input") {
    std::mt19937_64 rng(99);
    std::vector<Lease> leases;
    for (std::uint32_t ip = 1; ip <= 20; ++ip) {
        Millis t = static_cast<Millis>(rng() % 1000);
        for (int k = 0; k < 10; ++k) {
            const Millis len = 1 + static_cast<Millis>(rng() % 5000);
            leases.push_back(lease_on(ip, t, t + len, ip * 100 + static_cast<std::uint64_t>(k)));
            t += len + static_cast<Millis>(rng() % 2000);
        }
    }
    LeaseIndex idx(leases);
    std::vector<FlowRecord> flows;
    for (int i = 0; i < 5000; ++i) {
        const Millis s = static_cast<Millis>(rng() % 80000);
        flows.push_back(flow(1 + static_cast<std::uint32_t>(rng() % 25), 1 + static_cast<std::uint32_t>(rng() % 25), s,
                             s + static_cast<Millis>(rng() % 3000)));
    }
    MatchStats st;
    const auto core = match_flows(flows, idx, &st);
    CHECK(st.matched + st.unmatched == st.total);
    CHECK(st.core_records == core.size());
    std::size_t brute = 0;
    for (const auto& f : flows)
        for (auto ip : {f.src_ip, f.dst_ip})
            for (const auto& l : leases)
                if (l.ip == ip && l.start <= f.start && f.finish <= l.end) {
                    ++brute;
                    break;
                }
    CHECK(brute == core.size());
    for (const auto& c : core) {
        const auto ip = c.direction == Direction::Outbound ? c.flow.src_ip : c.flow.dst_ip;
        const auto* l = idx.find_containing(ip, c.flow.start, c.flow.finish);
        REQUIRE(l != nullptr);
        CHECK(validate(c, *l).empty());
    }
}

TEST_CASE("partition by local start day") {
    const int tz = -240;
    const Millis mid = DayKey::parse("2012-04-06").local_midnight(tz) + kMsPerDay;  // Saturday 00:00
    CoreFlow late;
    late.flow = flow(1, 2, mid - kMsPerMinute, mid + 10 * kMsPerMinute);
    CoreFlow at;
    at.flow = flow(1, 2, mid, mid + 1000);
    std::vector<CoreFlow> core{late, at};
    const auto days = partition_days(core, tz);
    REQUIRE(days.size() == 2);
    CHECK(days.begin()->first.day == DayKey::parse("2012-04-06"));
    CHECK_FALSE(days.begin()->first.day.is_weekend());
    CHECK(days.rbegin()->first.day.is_weekend());
}

TEST_CASE("match order does not change the core multiset") {
    std::vector<Lease> leases{lease_on(1, 0, 1000, 1), lease_on(2, 0, 1000, 2)};
    LeaseIndex idx(leases);
    std::vector<FlowRecord> flows{flow(1, 9, 10, 20), flow(9, 2, 30, 40), flow(1, 2, 50, 60)};
    auto a = match_flows(flows, idx);
    std::reverse(flows.begin(), flows.end());
    auto b = match_flows(flows, idx);
    sort_core(a);
    sort_core(b);
    CHECK(a == b);
}

TEST_CASE("core and lease files round trip") {
    CoreFlow c;
    c.flow = flow(0x0a000001, 0x08080808, 1334332274912LL, 1334332276576LL);
    c.device_mac = kDev;
    c.device_type = DeviceType::Flute;
    c.ap_mac = MacAddress::parse("00:1d:e5:8f:1b:30");
    c.building_id = 422;
    c.direction = Direction::Outbound;
    CHECK(parse_core_line(format_core_line(c)) == c);
    c.building_id.reset();
    CHECK(parse_core_line(format_core_line(c)) == c);
}

}
