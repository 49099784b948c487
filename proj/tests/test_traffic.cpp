#include <doctest.h>

#include <random>

#include "flames/error.hpp"
#include "flames/traffic.hpp"
#include "oracles.hpp"

using namespace flames;
using namespace flames::traffic;

namespace {

FlowRecord fr(Millis start, Millis finish, std::uint64_t bytes = 100, Protocol p = Protocol::Tcp,
              std::uint64_t packets = 1) {
    FlowRecord f;
    f.start = start;
    f.finish = finish;
    f.duration = finish - start;
    f.flow_bytes = bytes;
    f.packet_count = packets;
    f.protocol = p;
    return f;
}

CoreFlow cf(const FlowRecord& f, std::uint64_t dev = 1, std::uint64_t ap = 100,
            DeviceType t = DeviceType::Flute) {
    CoreFlow c;
    c.flow = f;
    c.device_mac = MacAddress::from_u64(dev);
    c.ap_mac = MacAddress::from_u64(ap);
    c.device_type = t;
    return c;
}

}  // namespace

TEST_SUITE("traffic") {

TEST_CASE("flow level stats") {
    std::vector<CoreFlow> one{cf(fr(0, 1500, 678, Protocol::Tcp, 3))};
    const auto s = flow_level_stats(one);
    CHECK(s.bytes.mean == 678);
    CHECK(s.bytes.median == 678);
    CHECK(s.bytes.std == 0);
    CHECK(s.packet_size.mean == doctest::Approx(226));
    CHECK(s.runtime_ms.mean == 1500);
    CHECK_THROWS_AS(flow_level_stats(std::vector<CoreFlow>{}), Error);

    // lognormal with mean 2070 and median 678, no outlier filter
    const double mu = std::log(678.0), sigma = std::sqrt(2 * std::log(2070.0 / 678.0));
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> ln(mu, sigma);
    std::vector<CoreFlow> many;
    for (int i = 0; i < 200000; ++i) many.push_back(cf(fr(0, 1, static_cast<std::uint64_t>(std::llround(ln(rng))) + 1)));
    const auto m = flow_level_stats(many, false);
    CHECK(m.bytes.median == doctest::Approx(678).epsilon(0.03));
    CHECK(m.bytes.mean == doctest::Approx(2070).epsilon(0.03));
}

TEST_CASE("groups by type and day class") {
    const int tz = 0;
    const Millis sat = DayKey::parse("2012-04-07").local_midnight(tz);
    std::vector<CoreFlow> core{cf(fr(sat, sat + 10)), cf(fr(0, 10), 2, 100, DeviceType::Cello),
                               cf(fr(0, 10), 3, 100, DeviceType::Unknown)};
    const auto g = flow_level_stats_by_group(core, tz);
    CHECK(g.size() == 2);
    CHECK(g.count({DeviceType::Flute, true}) == 1);
    CHECK(g.count({DeviceType::Cello, false}) == 1);
}

TEST_CASE("ap inter-arrival times") {
    std::vector<CoreFlow> core{cf(fr(0, 1)), cf(fr(4, 5)), cf(fr(10, 11)), cf(fr(50, 60), 2, 200)};
    const auto iat = iat_per_ap(core, 0);
    CHECK(iat.samples.at(DeviceType::Flute) == std::vector<double>{4, 6});
    CHECK(iat.streams == 2);
    CHECK(iat.skipped_streams == 1);
}

TEST_CASE("protocol split") {
    std::vector<CoreFlow> tcp{cf(fr(0, 1)), cf(fr(0, 1))};
    CHECK(protocol_split(tcp).flow_share[0] == 1.0);
    std::vector<CoreFlow> mixed{cf(fr(0, 1, 900, Protocol::Tcp)), cf(fr(0, 1, 100, Protocol::Udp))};
    const auto p = protocol_split(mixed);
    CHECK(p.flow_share[1] == 0.5);
    CHECK(p.byte_share[1] == doctest::Approx(0.1));
    CHECK(p.flow_share[0] + p.flow_share[1] + p.flow_share[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ap daily load and conservation") {
    std::vector<CoreFlow> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(cf(fr(i, i + 1, 100, Protocol::Tcp, 2)));
    const auto r = ap_daily_load(ten, 0);
    REQUIRE(r.loads.size() == 1);
    const auto& l = r.loads.begin()->second[0];
    CHECK(l.flows == 10);
    CHECK(l.packets == 20);
    CHECK(l.bytes == 1000);

    std::mt19937_64 rng(6);
    std::vector<CoreFlow> core;
    for (int i = 0; i < 3000; ++i) {
        const Millis s = static_cast<Millis>(rng() % (5 * kMsPerDay));
        core.push_back(cf(fr(s, s + 1000, 1 + rng() % 5000), 1 + rng() % 20, 100 + rng() % 7,
                          rng() % 2 ? DeviceType::Flute : DeviceType::Cello));
    }
    const auto load = ap_daily_load(core, -240);
    const auto daily = daily_traffic_table(core, {.tz_offset_minutes = -240});
    std::map<DayKey, double> by_device, by_ap;
    for (const auto& row : daily) by_device[row.day] += row.features.tby;
    for (const auto& [key, v] : load.loads) by_ap[key.second] += static_cast<double>(v[0].bytes + v[1].bytes);
    CHECK(by_device == by_ap);
    CHECK(load.zero_flow_fraction(DeviceType::Flute, false) >= 0.0);
}

TEST_CASE("weekend drop raises the zero-flow fraction") {
    const int tz = 0;
    const Millis fri = DayKey::parse("2012-04-06").local_midnight(tz);
    const Millis sat = fri + kMsPerDay;
    std::vector<CoreFlow> core;
    for (std::uint64_t ap = 0; ap < 10; ++ap) core.push_back(cf(fr(fri + 1000, fri + 2000), 1, ap));
    for (std::uint64_t ap = 0; ap < 3; ++ap) core.push_back(cf(fr(sat + 1000, sat + 2000), 1, ap));
    const auto load = ap_daily_load(core, tz);
    CHECK(load.zero_flow_fraction(DeviceType::Flute, false) == 0.0);
    CHECK(load.zero_flow_fraction(DeviceType::Flute, true) == doctest::Approx(0.7));
    CHECK(load.daily_bytes(DeviceType::Flute, true).size() == 10);
}

TEST_CASE("active time") {
    std::vector<FlowRecord> overlap{fr(0, 60000), fr(30000, 90000)};
    const auto a = active_time(overlap);
    CHECK(a.periods == 1);
    CHECK(a.tat == doctest::Approx(1.5));
    std::vector<FlowRecord> apart{fr(0, 60000), fr(200000, 260000)};
    const auto b = active_time(apart);
    CHECK(b.periods == 2);
    CHECK(b.tat == doctest::Approx(2.0));
    CHECK(b.aat == doctest::Approx(1.0));
    std::vector<FlowRecord> zero{fr(5000, 5000)};
    CHECK(active_time(zero).tat == 0);
    CHECK(active_time(zero).periods == 1);
}

TEST_CASE("active time matches a bitmap and ignores order") {
    std::mt19937_64 rng(12);
    for (int run = 0; run < 300; ++run) {
        std::vector<FlowRecord> flows;
        std::vector<std::pair<long, long>> iv;
        const std::size_t n = 1 + rng() % 20;
        for (std::size_t i = 0; i < n; ++i) {
            const long s = static_cast<long>(rng() % 500), len = static_cast<long>(rng() % 60);
            flows.push_back(fr(s * 1000, (s + len) * 1000));
            iv.emplace_back(s, s + len);
        }
        const auto a = active_time(flows, 0);
        CHECK(a.tat * 60 == doctest::Approx(static_cast<double>(oracle::union_seconds(iv))));
        std::shuffle(flows.begin(), flows.end(), rng);
        CHECK(active_time(flows, 0).tat == a.tat);
        CHECK(active_time(flows).tat <= 24 * 60);
    }
}

TEST_CASE("daily user traffic") {
    std::vector<FlowRecord> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(fr(i * 1000, i * 1000 + 500, 1000000));
    const auto t = user_daily_traffic(ten, {.tz_offset_minutes = 0});
    CHECK(t.tby == 1e7);
    CHECK(t.aby == 1e6);
    CHECK(t.sby == 0);
    CHECK(t.tfc == 10);
    CHECK(t.ruf == 0);
    CHECK(t.sfc == 0);
    CHECK(t.ait == doctest::Approx(1.0));
    CHECK(t.sit == doctest::Approx(0.0));
    CHECK(validate(t).empty());

    std::vector<FlowRecord> udp{fr(0, 10, 5, Protocol::Udp), fr(20, 30, 7, Protocol::Udp)};
    const auto u = user_daily_traffic(udp);
    CHECK(u.rub == 1.0);
    CHECK(u.ruf == 1.0);

    // hours 0 and 2 active, hour 1 empty: counts {2, 0, 1}
    std::vector<FlowRecord> spread{fr(0, 1), fr(10, 11), fr(2 * kMsPerHour, 2 * kMsPerHour + 1)};
    const auto sp = user_daily_traffic(spread, {.tz_offset_minutes = 0});
    CHECK(sp.sfc == doctest::Approx(std::sqrt(((2 - 1.0) * (2 - 1.0) + 1 + 0) / 3)));

    CHECK(user_daily_traffic(std::vector<FlowRecord>{}).tfc == 0);
}

TEST_CASE("quantiles and ecdf") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    const auto e = ecdf({3, 1, 1, 2});
    REQUIRE(e.size() == 3);
    CHECK(e[0] == std::pair<double, double>{1, 0.5});
    CHECK(e[2].second == 1.0);
}

}
