#include <doctest.h>

#include <numbers>
#include <random>

#include "flames/error.hpp"
#include "flames/mobility.hpp"
#include "oracles.hpp"

using namespace flames;
using namespace flames::mobility;

namespace {

constexpr double kDegPerMeter = 180.0 / (std::numbers::pi * kEarthRadiusM);

GeoPoint north_of(double meters) { return {40.0 + meters * kDegPerMeter, -86.9}; }

Session session(Millis start_s, Millis len_s, int ap, std::optional<BuildingId> b = {}) {
    Session s;
    s.device = MacAddress::from_u64(1);
    s.ap = MacAddress::from_u64(0x100 + static_cast<std::uint64_t>(ap));
    s.building = b;
    s.start = start_s * 1000;
    s.end = (start_s + len_s) * 1000;
    return s;
}

ingest::BuildingRegistry registry() {
    ingest::BuildingRegistry reg;
    for (BuildingId id = 1; id <= 3; ++id) {
        const auto p = north_of(100.0 * (id - 1));
        reg.buildings[id] = Building{id, "b" + std::to_string(id),
                                     id == 3 ? BuildingCategory::Housing : BuildingCategory::Academic, p.lat, p.lon};
    }
    reg.buildings[9] = Building{9, "museum", BuildingCategory::Museum, 40, -86.9};
    return reg;
}

}  // namespace

TEST_SUITE("mobility") {

TEST_CASE("haversine") {
    const GeoPoint a{0, 0}, b{0, 0.001};
    CHECK(haversine_m(a, a) == 0.0);
    CHECK(haversine_m(a, b) == doctest::Approx(111.195).epsilon(1e-4));
    CHECK(haversine_m(a, b) == haversine_m(b, a));
}

TEST_CASE("trajectory examples") {
    std::vector<GeoPoint> one{north_of(0), north_of(0), north_of(0)};
    const auto t0 = daily_trajectory_metrics(one);
    CHECK(t0.ljm == 0);
    CHECK(t0.dia == 0);
    CHECK(t0.tjm == 0);

    std::vector<GeoPoint> aba{north_of(0), north_of(300), north_of(0)};
    const auto t1 = daily_trajectory_metrics(aba);
    CHECK(t1.ljm == doctest::Approx(300).epsilon(1e-9));
    CHECK(t1.dia == doctest::Approx(300).epsilon(1e-9));
    CHECK(t1.tjm == doctest::Approx(600).epsilon(1e-9));

    std::vector<GeoPoint> line{north_of(0), north_of(100), north_of(250)};
    const auto t2 = daily_trajectory_metrics(line);
    CHECK(t2.ljm == doctest::Approx(150).epsilon(1e-9));
    CHECK(t2.dia == doctest::Approx(250).epsilon(1e-9));
    CHECK(t2.tjm == doctest::Approx(250).epsilon(1e-9));
}

TEST_CASE("trajectory matches brute force") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> off(-0.01, 0.01);
    for (int run = 0; run < 500; ++run) {
        const std::size_t n = 1 + rng() % 10;
        std::vector<GeoPoint> pool;
        for (int k = 0; k < 4; ++k) pool.push_back({40.42 + off(rng), -86.92 + off(rng)});
        std::vector<GeoPoint> p;
        for (std::size_t i = 0; i < n; ++i) p.push_back(pool[rng() % pool.size()]);
        const auto got = daily_trajectory_metrics(p);
        const auto want = oracle::trajectory(p);
        CHECK(got.ljm == want.ljm);
        CHECK(got.dia == want.dia);
        CHECK(got.tjm == want.tjm);
        CHECK(got.dia >= got.ljm);
        CHECK(got.tjm >= got.ljm);
    }
}

TEST_CASE("radius of gyration") {
    std::vector<Vec2> one{{5, 5}, {5, 5}};
    CHECK(radius_of_gyration(one) == 0);
    std::vector<Vec2> two{{0, 0}, {200, 0}};
    CHECK(radius_of_gyration(two) == doctest::Approx(100));
    std::vector<double> w{3, 1};
    CHECK(radius_of_gyration(two, w) == doctest::Approx(std::sqrt(0.75 * 50 * 50 + 0.25 * 150 * 150)));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1000, 1000);
    for (int run = 0; run < 100; ++run) {
        std::vector<Vec2> p(2 + rng() % 8);
        std::vector<double> ws;
        for (auto& v : p) {
            v = {u(rng), u(rng)};
            ws.push_back(std::abs(u(rng)) + 1);
        }
        const double r = radius_of_gyration(p, ws);
        const double th = u(rng), dx = u(rng), dy = u(rng);
        std::vector<Vec2> moved, scaled;
        double cx = 0, cy = 0, tw = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            cx += ws[i] * p[i].x;
            cy += ws[i] * p[i].y;
            tw += ws[i];
        }
        cx /= tw;
        cy /= tw;
        for (const auto& v : p) {
            moved.push_back({std::cos(th) * v.x - std::sin(th) * v.y + dx, std::sin(th) * v.x + std::cos(th) * v.y + dy});
            scaled.push_back({cx + 2 * (v.x - cx), cy + 2 * (v.y - cy)});
        }
        CHECK(std::abs(radius_of_gyration(moved, ws) - r) <= 1e-6 * r);
        CHECK(radius_of_gyration(scaled, ws) == doctest::Approx(2 * r));
    }
}

TEST_CASE("visitation") {
    std::vector<Session> s{session(0, 3600, 1, 1), session(3600, 2400, 2, 1), session(6000, 1800, 3, 2)};
    const auto v = visitation_metrics(s);
    CHECK(v.bld == 2);
    CHECK(v.apc == 3);
    CHECK(v.pdt == doctest::Approx(100));
    CHECK(v.dlt == doctest::Approx(130));
    CHECK(v.preferred == 1);

    std::vector<Session> single{session(0, 600, 1, 5)};
    CHECK(visitation_metrics(single).pdt == visitation_metrics(single).dlt);

    std::vector<Session> tie{session(0, 3000, 1, 7), session(3000, 3000, 2, 4)};
    CHECK(visitation_metrics(tie).preferred == 4);
}

TEST_CASE("daily mobility row") {
    const auto reg = registry();
    std::vector<Session> s{session(0, 600, 1, 1), session(600, 600, 2, 2), session(1200, 600, 3, 3)};
    const auto m = daily_mobility(s, reg);
    CHECK(m.ljm == doctest::Approx(100).epsilon(1e-6));
    CHECK(m.dia == doctest::Approx(200).epsilon(1e-6));
    CHECK(m.tjm == doctest::Approx(200).epsilon(1e-6));
    CHECK(m.gyr == doctest::Approx(std::sqrt(20000.0 / 3)).epsilon(1e-3));
    CHECK(m.bld == 3);
    CHECK(m.apc == 3);
    CHECK(validate(m).empty());

    MobilityOptions ap;
    ap.ap_granularity = true;
    std::vector<Session> same{session(0, 600, 1, 1), session(600, 600, 2, 1)};
    CHECK(daily_mobility(same, reg).bld == 1);
    CHECK(daily_mobility(same, reg, ap).bld == 2);
}

TEST_CASE("session start histogram") {
    const auto reg = registry();
    const int tz = 0;
    std::vector<Session> s{session(9 * 3600, 60, 1, 1), session(9 * 3600 + 1800, 60, 1, 2)};
    const auto h = session_start_histogram(s, reg, tz);
    REQUIRE(h.categories.size() == 1);
    CHECK(h.categories[0].category == BuildingCategory::Academic);
    CHECK(h.categories[0].pdf[9] == 1.0);
    CHECK(h.empty_categories == std::vector<BuildingCategory>{BuildingCategory::Housing, BuildingCategory::Museum});

    std::mt19937_64 rng(1);
    std::vector<Session> uni;
    for (int i = 0; i < 48000; ++i) uni.push_back(session(static_cast<Millis>(rng() % 86400), 60, 1, 1));
    const auto hu = session_start_histogram(uni, reg, tz);
    double sum = 0;
    for (double p : hu.categories[0].pdf) {
        CHECK(p == doctest::Approx(1.0 / 24).epsilon(0.1));
        sum += p;
    }
    CHECK(std::abs(sum - 1) < 1e-9);
}

TEST_CASE("visited locations") {
    const int tz = 0;
    std::vector<Session> s;
    for (int d = 0; d < 5; ++d) s.push_back(session(d * 86400 + 3600, 60, 1, d + 1));
    CHECK(visited_locations_curve(s, tz) == std::vector<std::size_t>{1, 2, 3, 4, 5});
    s.push_back(session(5 * 86400 + 3600, 60, 1, 2));
    s.push_back(session(6 * 86400 + 3600, 60, 1, 4));
    CHECK(visited_locations_curve(s, tz) == std::vector<std::size_t>{1, 2, 3, 4, 5, 5, 5});

    // exploration until day 7, then only revisits
    std::vector<Session> e;
    for (int d = 0; d < 20; ++d) e.push_back(session(d * 86400 + 3600, 60, 1, d < 7 ? d + 1 : 1 + d % 7));
    const auto curve = visited_locations_curve(e, tz);
    std::vector<double> c(curve.begin(), curve.end());
    const auto breaks = detect_slope_changes(c);
    REQUIRE(breaks.size() == 1);
    CHECK(breaks[0] + 1 == 7);

    const auto agg = aggregate_visited_curves({{1, 2}, {1, 2, 3, 4}});
    CHECK(agg.mean == std::vector<double>{1, 2, 2.5, 3});
}

TEST_CASE("zipf rank fit") {
    for (double beta : {1.16, 1.36}) {
        const auto v = oracle::zipf_visits(beta, 200, 20, 2000, 17);
        const auto fit = zipf_rank_fit(v, {.min_devices = 5, .max_rank = 10});
        REQUIRE(fit.beta);
        CHECK(std::abs(*fit.beta - beta) < 0.05);
    }
    std::vector<std::vector<std::uint64_t>> single(10, std::vector<std::uint64_t>{7});
    const auto t = zipf_rank_table(single);
    CHECK(t.rank_probability == std::vector<double>{1.0});
    CHECK_THROWS_AS(zipf_rank_fit(single), Error);

    const auto flat = oracle::zipf_visits(0.0, 200, 10, 5000, 3);
    const auto f = zipf_rank_fit(flat, {.min_devices = 5, .max_rank = 10});
    // rank-sorting uniform counts leaves a small positive slope
    CHECK(std::abs(*f.beta) < 0.1);
}

TEST_CASE("duration kernel") {
    std::vector<Session> idle(10, session(0, 300, 1));
    const auto k = session_duration_kernel(idle);
    CHECK(k.five_minute_mass == 1.0);
    double sum = 0;
    int nonzero = 0;
    for (double p : k.pdf) {
        sum += p;
        nonzero += p > 0;
    }
    CHECK(std::abs(sum - 1) < 1e-9);
    CHECK(nonzero == 1);
    CHECK_THROWS_AS(session_duration_kernel(std::vector<Session>{}), Error);

    // planted one-hour blocks over a broad background
    std::mt19937_64 rng(2);
    std::lognormal_distribution<double> bg(std::log(600.0), 1.2);
    std::vector<Session> s;
    for (int i = 0; i < 20000; ++i) s.push_back(session(0, static_cast<Millis>(bg(rng)) + 1, 1));
    for (int i = 0; i < 3000; ++i) s.push_back(session(0, 3600, 1));
    const auto kk = session_duration_kernel(s);
    std::size_t hour_bin = 0;
    while (kk.edges[hour_bin + 1] <= 3600) ++hour_bin;
    CHECK(kk.pdf[hour_bin] > kk.pdf[hour_bin - 1]);
    CHECK(kk.pdf[hour_bin] > kk.pdf[hour_bin + 1]);
}

TEST_CASE("pass-by detection") {
    auto run = [](std::vector<Session> s) { return detect_passby_aps({s}).passby_count; };
    CHECK(run({session(0, 120, 1), session(120, 60, 2), session(180, 180, 3)}).size() == 3);
    CHECK(run({session(0, 120, 1), session(120, 600, 2), session(720, 60, 3)}).empty());
    CHECK(run({session(0, 120, 1), session(120, 60, 1), session(180, 60, 2)}).empty());
    const auto r = detect_passby_aps({{session(0, 120, 1), session(120, 60, 2), session(180, 180, 3),
                                       session(360, 3000, 1)}});
    CHECK(r.score.at(MacAddress::from_u64(0x101)) == doctest::Approx(0.5));
}

TEST_CASE("return probability") {
    std::vector<Session> daily;
    for (int d = 0; d < 10; ++d) {
        daily.push_back(session(d * 86400, 3600, 1, 1));
        daily.push_back(session(d * 86400 + 7200, 3600, 2, 2));
    }
    const auto p = return_probability({daily});
    REQUIRE(p.size() == 337);
    double sum = 0;
    for (std::size_t h = 0; h < p.size(); ++h) {
        sum += p[h];
        if (h % 24 != 0) CHECK(p[h] == 0);
    }
    CHECK(std::abs(sum - 1) < 1e-9);

    std::vector<Session> once{session(0, 60, 1, 1), session(100, 60, 2, 2)};
    CHECK(return_probability({once}).empty());

    std::vector<Session> cycle;
    for (int k = 0; k < 4; ++k) {
        cycle.push_back(session(k * 48 * 3600, 600, 1, 1));
        cycle.push_back(session(k * 48 * 3600 + 3600, 600, 2, 2));
    }
    const auto c = return_probability({cycle});
    CHECK(std::max_element(c.begin(), c.end()) - c.begin() == 48);
}

TEST_CASE("hourly curves") {
    auto ev = [](std::uint64_t dev, int hour) {
        ApEvent e;
        e.user_mac = MacAddress::from_u64(dev);
        e.lease_begin = static_cast<Millis>(hour) * kMsPerHour;
        e.lease_end = e.lease_begin + 1000;
        return e;
    };
    std::vector<ApEvent> events;
    for (std::uint64_t d = 1; d <= 4; ++d)
        for (int h = 9; h <= 17; ++h) events.push_back(ev(d, h));
    auto type_of = [](const MacAddress& m) { return m.to_u64() % 2 ? DeviceType::Flute : DeviceType::Cello; };
    const auto c = hourly_association_curves(events, type_of, 0);
    for (int h = 0; h < 24; ++h) {
        const bool inside = h >= 9 && h <= 17;
        CHECK(c.flute_fraction[static_cast<std::size_t>(h)] == (inside ? 1.0 : 0.0));
        CHECK(c.cello_fraction[static_cast<std::size_t>(h)] == (inside ? 1.0 : 0.0));
        CHECK(c.stay_difference[static_cast<std::size_t>(h)] == 0);
    }
    // an extra short-stay flute
    events.push_back(ev(5, 12));
    const auto c2 = hourly_association_curves(events, type_of, 0);
    CHECK(c2.stay_difference[0] == 1);
}

}
