#include "flames/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <tuple>
#include <variant>

#include <fmt/format.h>

#include "flames/error.hpp"
#include "flames/io.hpp"
#include "flames/mobility.hpp"
#include "flames/text.hpp"

namespace flames::synth {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

PopulationSpec PopulationSpec::defaults() {
    PopulationSpec s;
    auto& f = s.flute;
    f.devices = 124;
    f.size_median = 678;
    f.size_sigma = 1.494;
    f.packets_median = 5;
    f.packets_sigma = 1.0;
    f.zipf_exponent = 1.16;
    f.aps_per_visit_mean = 1.2;
    f.idle_session_mass = 0.2;
    f.class_session_mass = 0.1;
    f.session_median_s = 1200;
    f.passby_prob = 0.25;
    f.udp_device_prob = 1.0;
    f.udp_share_mean = 0.1;
    f.admob_prob = 0.3;
    f.weekday = {.active_prob = 0.9, .buildings_mean = 5.4, .buildings_shape = 0.72, .start_hour_mean = 8.5,
                 .start_hour_sd = 1.2, .presence_median_min = 235, .presence_sigma = 0.77, .preferred_share = 0.55,
                 .active_periods_mean = 10, .period_median_s = 50, .period_sigma = 1.0};
    f.weekend = {.active_prob = 0.75, .buildings_mean = 2.8, .buildings_shape = 0.22, .start_hour_mean = 10.5,
                 .start_hour_sd = 1.5, .presence_median_min = 200, .presence_sigma = 0.8, .preferred_share = 0.6,
                 .active_periods_mean = 9, .period_median_s = 45, .period_sigma = 1.0};

    auto& c = s.cello;
    c.devices = 76;
    c.size_median = 142;
    c.size_sigma = 1.874;
    c.packets_median = 3;
    c.packets_sigma = 1.1;
    c.count_coupling = 1.5;
    c.size_coupling = 1.0;
    c.zipf_exponent = 1.36;
    c.aps_per_visit_mean = 0.8;
    c.idle_session_mass = 0.15;
    c.class_session_mass = 0.2;
    c.session_median_s = 1800;
    c.passby_prob = 0;
    c.udp_device_prob = 1.0;
    c.udp_share_mean = 0.18;
    c.admob_prob = 0;
    c.weekday = {.active_prob = 0.85, .buildings_mean = 1.8, .buildings_shape = 0.18, .start_hour_mean = 9.5,
                 .start_hour_sd = 1.5, .presence_median_min = 235, .presence_sigma = 0.77, .preferred_share = 0.6,
                 .active_periods_mean = 10, .period_median_s = 180, .period_sigma = 1.0};
    c.weekend = {.active_prob = 0.55, .buildings_mean = 1.5, .buildings_shape = 0.09, .start_hour_mean = 11.0,
                 .start_hour_sd = 1.5, .presence_median_min = 230, .presence_sigma = 0.77, .preferred_share = 0.6,
                 .active_periods_mean = 5, .period_median_s = 250, .period_sigma = 1.0};
    return s;
}

namespace {

using Target = std::variant<double*, int*, std::uint64_t*, std::string*>;
static_assert(std::is_same_v<std::size_t, std::uint64_t>);

void bind_day(std::vector<std::pair<std::string, Target>>& b, const std::string& p, DayClassParams& d) {
    b.emplace_back(p + "active_prob", &d.active_prob);
    b.emplace_back(p + "buildings_mean", &d.buildings_mean);
    b.emplace_back(p + "buildings_shape", &d.buildings_shape);
    b.emplace_back(p + "start_hour_mean", &d.start_hour_mean);
    b.emplace_back(p + "start_hour_sd", &d.start_hour_sd);
    b.emplace_back(p + "presence_median_min", &d.presence_median_min);
    b.emplace_back(p + "presence_sigma", &d.presence_sigma);
    b.emplace_back(p + "preferred_share", &d.preferred_share);
    b.emplace_back(p + "active_periods_mean", &d.active_periods_mean);
    b.emplace_back(p + "period_median_s", &d.period_median_s);
    b.emplace_back(p + "period_sigma", &d.period_sigma);
}

void bind_type(std::vector<std::pair<std::string, Target>>& b, const std::string& p, TypeParams& t) {
    b.emplace_back(p + "devices", &t.devices);
    b.emplace_back(p + "size_median", &t.size_median);
    b.emplace_back(p + "size_sigma", &t.size_sigma);
    b.emplace_back(p + "packets_median", &t.packets_median);
    b.emplace_back(p + "packets_sigma", &t.packets_sigma);
    b.emplace_back(p + "iat_alpha", &t.iat_alpha);
    b.emplace_back(p + "iat_beta", &t.iat_beta);
    b.emplace_back(p + "iat_scale_s", &t.iat_scale_s);
    b.emplace_back(p + "flow_runtime_median_s", &t.flow_runtime_median_s);
    b.emplace_back(p + "flow_runtime_sigma", &t.flow_runtime_sigma);
    b.emplace_back(p + "count_coupling", &t.count_coupling);
    b.emplace_back(p + "size_coupling", &t.size_coupling);
    b.emplace_back(p + "device_activity_sigma", &t.device_activity_sigma);
    b.emplace_back(p + "mobility_coupling", &t.mobility_coupling);
    b.emplace_back(p + "zipf_exponent", &t.zipf_exponent);
    b.emplace_back(p + "aps_per_visit_mean", &t.aps_per_visit_mean);
    b.emplace_back(p + "idle_session_mass", &t.idle_session_mass);
    b.emplace_back(p + "class_session_mass", &t.class_session_mass);
    b.emplace_back(p + "session_median_s", &t.session_median_s);
    b.emplace_back(p + "session_sigma", &t.session_sigma);
    b.emplace_back(p + "passby_prob", &t.passby_prob);
    b.emplace_back(p + "udp_device_prob", &t.udp_device_prob);
    b.emplace_back(p + "udp_share_mean", &t.udp_share_mean);
    b.emplace_back(p + "udp_size_factor", &t.udp_size_factor);
    b.emplace_back(p + "admob_prob", &t.admob_prob);
    bind_day(b, p + "weekday.", t.weekday);
    bind_day(b, p + "weekend.", t.weekend);
}

std::vector<std::pair<std::string, Target>> bindings(PopulationSpec& s) {
    std::vector<std::pair<std::string, Target>> b;
    b.emplace_back("population.seed", &s.seed);
    b.emplace_back("population.start_date", &s.start_date);
    b.emplace_back("population.days", &s.days);
    b.emplace_back("population.tz_offset_minutes", &s.tz_offset_minutes);
    b.emplace_back("population.buildings", &s.buildings);
    b.emplace_back("population.campus_radius_m", &s.campus_radius_m);
    b.emplace_back("population.center_lat", &s.center_lat);
    b.emplace_back("population.center_lon", &s.center_lon);
    b.emplace_back("population.aps_min", &s.aps_min);
    b.emplace_back("population.aps_max", &s.aps_max);
    b.emplace_back("population.servers", &s.servers);
    b.emplace_back("ouis.survey", &s.ouis.survey);
    b.emplace_back("ouis.registry", &s.ouis.registry);
    b.emplace_back("ouis.unlabeled", &s.ouis.unlabeled);
    b.emplace_back("ouis.both", &s.ouis.both);
    b.emplace_back("ouis.unlabeled_share", &s.ouis.unlabeled_share);
    b.emplace_back("ouis.both_share", &s.ouis.both_share);
    bind_type(b, "flute.", s.flute);
    bind_type(b, "cello.", s.cello);
    return b;
}

std::string render(const Target& t) {
    return std::visit(
        [](auto* p) -> std::string {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>)
                return text::format_double(*p);
            else if constexpr (std::is_same_v<T, std::string>)
                return *p;
            else
                return std::to_string(*p);
        },
        t);
}

void assign(const Target& t, const std::string& key, const std::string& v) {
    auto bad = [&] { throw Error(Errc::SpecInvalid, "spec key '" + key + "': bad value '" + v + "'"); };
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) {
                auto d = text::parse_double(v);
                if (!d) bad();
                *p = *d;
            } else if constexpr (std::is_same_v<T, std::string>) {
                *p = v;
            } else if constexpr (std::is_same_v<T, int>) {
                auto d = text::parse_int(v);
                if (!d) bad();
                *p = static_cast<int>(*d);
            } else {
                auto d = text::parse_uint(v);
                if (!d) bad();
                *p = static_cast<T>(*d);
            }
        },
        t);
}

}  // namespace

PopulationSpec PopulationSpec::from_config(const config::Config& cfg) {
    PopulationSpec s = defaults();
    auto b = bindings(s);
    for (const auto& [key, value] : cfg.entries()) {
        if (!(key.starts_with("population.") || key.starts_with("ouis.") || key.starts_with("flute.") ||
              key.starts_with("cello.")))
            continue;  // other stages' sections
        auto it = std::find_if(b.begin(), b.end(), [&](const auto& e) { return e.first == key; });
        if (it == b.end()) throw Error(Errc::SpecInvalid, "unknown spec key '" + key + "'");
        assign(it->second, key, value);
    }
    s.validate();
    return s;
}

void PopulationSpec::validate() const {
    auto fail = [](const std::string& m) { throw Error(Errc::SpecInvalid, m); };
    if (days < 1) fail("days must be >= 1");
    if (buildings < 1) fail("buildings must be >= 1");
    if (aps_min < 1 || aps_max < aps_min) fail("need 1 <= aps_min <= aps_max");
    if (!(campus_radius_m > 0)) fail("campus_radius_m must be positive");
    if (servers < 4) fail("servers must be >= 4");
    if (flute.devices + cello.devices == 0) fail("no devices");
    try {
        (void)DayKey::parse(start_date);
    } catch (const Error&) {
        fail("bad start_date '" + start_date + "'");
    }
    auto prob = [&](double p, const std::string& n) {
        if (!(p >= 0 && p <= 1)) fail(n + " must be in [0, 1]");
    };
    auto pos = [&](double v, const std::string& n) {
        if (!(v > 0)) fail(n + " must be positive");
    };
    prob(ouis.unlabeled_share, "ouis.unlabeled_share");
    prob(ouis.both_share, "ouis.both_share");
    if (ouis.unlabeled_share + ouis.both_share > 1) fail("OUI shares exceed 1");
    if (ouis.survey + ouis.registry == 0) fail("need at least one labeled OUI per type");
    for (const auto* tp : {&flute, &cello}) {
        const std::string n = tp == &flute ? "flute." : "cello.";
        const auto& t = *tp;
        pos(t.size_median, n + "size_median");
        pos(t.size_sigma, n + "size_sigma");
        pos(t.packets_median, n + "packets_median");
        pos(t.packets_sigma, n + "packets_sigma");
        pos(t.iat_alpha, n + "iat_alpha");
        pos(t.iat_beta, n + "iat_beta");
        pos(t.iat_scale_s, n + "iat_scale_s");
        pos(t.flow_runtime_median_s, n + "flow_runtime_median_s");
        pos(t.session_median_s, n + "session_median_s");
        pos(t.zipf_exponent, n + "zipf_exponent");
        if (t.size_coupling < 0 || t.count_coupling < 0 || t.device_activity_sigma < 0)
            fail(n + "couplings must be >= 0");
        if (t.size_coupling >= t.size_sigma) fail(n + "size_coupling must be below size_sigma");
        if (t.aps_per_visit_mean < 0) fail(n + "aps_per_visit_mean must be >= 0");
        prob(t.idle_session_mass, n + "idle_session_mass");
        prob(t.class_session_mass, n + "class_session_mass");
        if (t.idle_session_mass + t.class_session_mass > 1) fail(n + "session masses exceed 1");
        prob(t.passby_prob, n + "passby_prob");
        prob(t.udp_device_prob, n + "udp_device_prob");
        prob(t.admob_prob, n + "admob_prob");
        if (!(t.udp_share_mean > 0 && t.udp_share_mean < 1)) fail(n + "udp_share_mean must be in (0, 1)");
        pos(t.udp_size_factor, n + "udp_size_factor");
        for (const auto* d : {&t.weekday, &t.weekend}) {
            const std::string dn = n + (d == &t.weekday ? "weekday." : "weekend.");
            prob(d->active_prob, dn + "active_prob");
            if (!(d->buildings_mean >= 1)) fail(dn + "buildings_mean must be >= 1");
            pos(d->buildings_shape, dn + "buildings_shape");
            if (!(d->preferred_share > 0 && d->preferred_share < 1)) fail(dn + "preferred_share must be in (0, 1)");
            pos(d->presence_median_min, dn + "presence_median_min");
            pos(d->presence_sigma, dn + "presence_sigma");
            if (d->start_hour_sd < 0) fail(dn + "start_hour_sd must be >= 0");
            if (d->active_periods_mean < 0) fail(dn + "active_periods_mean must be >= 0");
            pos(d->period_median_s, dn + "period_median_s");
            pos(d->period_sigma, dn + "period_sigma");
        }
    }
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& r, double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(r); }
double normal(Rng& r) { return std::normal_distribution<double>(0.0, 1.0)(r); }
bool bernoulli(Rng& r, double p) { return uniform(r) < p; }
double beta(Rng& r, double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(r);
    const double y = std::gamma_distribution<double>(b, 1.0)(r);
    return x + y > 0 ? x / (x + y) : 0.5;
}
int poisson(Rng& r, double mean) { return mean > 0 ? std::poisson_distribution<int>(mean)(r) : 0; }
std::size_t pick(Rng& r, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(r); }

struct Ap {
    std::string name;
    MacAddress mac;
};

struct SiteBuilding {
    Building b;
    mobility::Vec2 pos;
    std::vector<Ap> aps;
};

struct World {
    std::vector<SiteBuilding> buildings;
    std::vector<Ipv4> servers;   // index < kAdServers are ad-network hosts
    std::vector<double> server_cdf;  // popularity over non-ad servers
};

constexpr std::size_t kAdServers = 3;

BuildingCategory category_for(std::size_t i) {
    static constexpr BuildingCategory cycle[] = {
        BuildingCategory::Academic, BuildingCategory::Housing,        BuildingCategory::Academic,
        BuildingCategory::Social,   BuildingCategory::Academic,       BuildingCategory::Housing,
        BuildingCategory::Administrative, BuildingCategory::Academic, BuildingCategory::Library,
        BuildingCategory::Sports,   BuildingCategory::Academic,       BuildingCategory::Housing,
        BuildingCategory::Social,   BuildingCategory::Other,          BuildingCategory::Police,
        BuildingCategory::Museum,   BuildingCategory::Academic,       BuildingCategory::Administrative,
        BuildingCategory::Housing,  BuildingCategory::Sports,
    };
    return cycle[i % std::size(cycle)];
}

World build_world(const PopulationSpec& spec, Rng& rng, Traces& out) {
    World w;
    const double lat0 = spec.center_lat * std::numbers::pi / 180.0;
    std::uint64_t ap_serial = 0x001de5000000ULL;
    for (int i = 0; i < spec.buildings; ++i) {
        SiteBuilding sb;
        sb.b.id = 101 + i;
        sb.b.category = category_for(static_cast<std::size_t>(i));
        sb.b.name = fmt::format("{} {}", to_string(sb.b.category), sb.b.id);
        const double r = spec.campus_radius_m * std::sqrt(uniform(rng));
        const double th = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        sb.pos = {r * std::cos(th), r * std::sin(th)};
        sb.b.lat = spec.center_lat + sb.pos.y / mobility::kEarthRadiusM * 180.0 / std::numbers::pi;
        sb.b.lon = spec.center_lon + sb.pos.x / (mobility::kEarthRadiusM * std::cos(lat0)) * 180.0 / std::numbers::pi;
        const int naps = std::uniform_int_distribution<int>(spec.aps_min, spec.aps_max)(rng);
        for (int k = 0; k < naps; ++k) {
            const int room = 100 + static_cast<int>(pick(rng, 300));
            sb.aps.push_back({fmt::format("b{}r{}-{}-{}", sb.b.id, room, k % 2 ? "cor" : "win", k + 1),
                              MacAddress::from_u64(++ap_serial)});
        }
        out.registry.buildings.emplace(sb.b.id, sb.b);
        out.registry.rules.emplace(fmt::format("b{}r", sb.b.id), sb.b.id);
        w.buildings.push_back(std::move(sb));
    }

    static constexpr const char* ad_hosts[kAdServers] = {"r.admob.com", "mm.admob.com", "api.admob.com"};
    static constexpr const char* zones[] = {"cdn.example.net", "static.example.com", "api.example.org",
                                            "media.example.net", "mail.example.com"};
    std::set<std::uint32_t> used;
    for (std::size_t i = 0; i < spec.servers; ++i) {
        std::uint32_t v;
        do {
            const std::uint32_t base = (i < kAdServers ? 0x4A7D0000u : 0x17000000u + (static_cast<std::uint32_t>(pick(rng, 64)) << 18));
            v = base | static_cast<std::uint32_t>(pick(rng, 0xFFFF) + 1);
        } while (!used.insert(v).second);
        const Ipv4 ip(v);
        w.servers.push_back(ip);
        out.dns.emplace(ip, i < kAdServers ? std::string(ad_hosts[i])
                                           : fmt::format("s{}.{}", i, zones[i % std::size(zones)]));
    }
    double acc = 0;
    for (std::size_t i = kAdServers; i < w.servers.size(); ++i) {
        acc += 1.0 / std::pow(static_cast<double>(i - kAdServers + 1), 0.9);
        w.server_cdf.push_back(acc);
    }
    for (auto& c : w.server_cdf) c /= acc;
    return w;
}

struct OuiPools {
    std::map<DeviceType, std::vector<Oui>> survey, registry, unlabeled;
    std::vector<Oui> both;
};

OuiPools build_ouis(const PopulationSpec& spec, Rng& rng, Traces& out) {
    OuiPools p;
    std::set<Oui> used;
    auto fresh = [&] {
        for (;;) {
            const auto v = static_cast<std::uint32_t>(pick(rng, 0x1000000));
            const Oui o = MacAddress::from_u64(static_cast<std::uint64_t>(v & 0xFCFFFFu) << 24).oui();
            if (used.insert(o).second) return o;
        }
    };
    for (auto t : {DeviceType::Flute, DeviceType::Cello}) {
        const auto label = t == DeviceType::Flute ? ingest::Label::Flute : ingest::Label::Cello;
        for (std::size_t i = 0; i < spec.ouis.survey; ++i) {
            p.survey[t].push_back(fresh());
            out.labels.assign({p.survey[t].back(), label, ingest::LabelSource::Survey});
        }
        for (std::size_t i = 0; i < spec.ouis.registry; ++i) {
            p.registry[t].push_back(fresh());
            out.labels.assign({p.registry[t].back(), label, ingest::LabelSource::Registry});
        }
        for (std::size_t i = 0; i < spec.ouis.unlabeled; ++i) p.unlabeled[t].push_back(fresh());
    }
    for (std::size_t i = 0; i < spec.ouis.both; ++i) {
        p.both.push_back(fresh());
        out.labels.assign({p.both.back(), ingest::Label::Both, ingest::LabelSource::Registry});
    }
    return p;
}

struct SessionPlan {
    std::size_t building;  // index into World::buildings
    std::size_t ap;
    Millis start;
    Millis end;
};

struct DeviceContext {
    const PopulationSpec& spec;
    const World& world;
    const TypeParams& tp;
    DeviceType type;
    MacAddress mac;
    Ipv4 ip;
    Rng rng;
    std::vector<std::size_t> ranking;  // building indices by preference
    std::vector<double> rank_weight;
    bool uses_udp = false;
    double udp_share = 0;
    double activity = 1;  // per-device level, mean one
};

double session_length_s(DeviceContext& d) {
    const double u = uniform(d.rng);
    if (u < d.tp.idle_session_mass) return 300;
    if (u < d.tp.idle_session_mass + d.tp.class_session_mass) return bernoulli(d.rng, 0.6) ? 3600 : 7200;
    const double s = d.tp.session_median_s * std::exp(d.tp.session_sigma * normal(d.rng));
    return std::clamp(s, 30.0, 4 * 3600.0);
}

// Zipf-weighted draw of `k` distinct buildings from the device's ranking.
std::vector<std::size_t> choose_buildings(DeviceContext& d, std::size_t k) {
    std::vector<double> w = d.rank_weight;
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < k; ++n) {
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        double x = uniform(d.rng, 0.0, total);
        std::size_t i = 0;
        for (; i + 1 < w.size(); ++i) {
            if (x < w[i]) break;
            x -= w[i];
        }
        while (w[i] == 0) i = (i + 1) % w.size();
        out.push_back(d.ranking[i]);
        w[i] = 0;
    }
    return out;
}

void visit_sessions(DeviceContext& d, std::size_t b, Millis start, Millis end, std::vector<SessionPlan>& out) {
    const auto& aps = d.world.buildings[b].aps;
    const std::size_t n_aps = std::min<std::size_t>(aps.size(), 1 + static_cast<std::size_t>(poisson(d.rng, d.tp.aps_per_visit_mean)));
    std::vector<std::size_t> subset(aps.size());
    std::iota(subset.begin(), subset.end(), 0);
    std::shuffle(subset.begin(), subset.end(), d.rng);
    subset.resize(n_aps);
    Millis t = start;
    std::size_t last = subset.size();
    while (t < end) {
        auto len = static_cast<Millis>(session_length_s(d)) * kMsPerSecond;
        if (end - t - len < 30 * kMsPerSecond) len = end - t;
        std::size_t k = pick(d.rng, subset.size());
        if (subset.size() > 1 && k == last) k = (k + 1) % subset.size();
        last = k;
        out.push_back({b, subset[k], t, t + len});
        t += len;
    }
}

void passby_sessions(DeviceContext& d, const std::vector<std::size_t>& avoid, Millis& t,
                     std::vector<SessionPlan>& out) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < d.world.buildings.size(); ++i)
        if (d.world.buildings[i].aps.size() >= 3 && std::find(avoid.begin(), avoid.end(), i) == avoid.end())
            candidates.push_back(i);
    if (candidates.empty()) return;
    const auto b = candidates[pick(d.rng, candidates.size())];
    std::vector<std::size_t> aps(d.world.buildings[b].aps.size());
    std::iota(aps.begin(), aps.end(), 0);
    std::shuffle(aps.begin(), aps.end(), d.rng);
    for (std::size_t k = 0; k < 3; ++k) {
        const Millis len = static_cast<Millis>(uniform(d.rng, 30, 200)) * kMsPerSecond;
        out.push_back({b, aps[k], t, t + len});
        t += len;
    }
}

void emit_flow(DeviceContext& d, Millis t, const std::vector<SessionPlan>& sessions, double log_size_mean,
               double size_sigma, Traces& out, DeviceTruth& truth, bool ad) {
    auto it = std::upper_bound(sessions.begin(), sessions.end(), t,
                               [](Millis v, const SessionPlan& s) { return v < s.start; });
    if (it == sessions.begin()) return;
    --it;
    if (t >= it->end) return;
    FlowRecord f;
    f.start = t;
    const double rt = d.tp.flow_runtime_median_s * std::exp(d.tp.flow_runtime_sigma * normal(d.rng));
    f.finish = std::min(it->end, t + static_cast<Millis>(std::llround(rt * 1000.0)));
    f.duration = f.finish - f.start;
    const bool udp = !ad && d.uses_udp && bernoulli(d.rng, d.udp_share);
    f.protocol = udp ? Protocol::Udp : Protocol::Tcp;
    double size = std::exp(log_size_mean + size_sigma * normal(d.rng));
    if (udp) size *= d.tp.udp_size_factor;
    f.flow_bytes = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(size)));
    const double pk = d.tp.packets_median * std::exp(d.tp.packets_sigma * normal(d.rng));
    const auto lo = std::max<std::uint64_t>(1, (f.flow_bytes + 1499) / 1500);
    const auto hi = std::max<std::uint64_t>(lo, f.flow_bytes / 40);
    f.packet_count = std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(pk)), lo, hi);

    Ipv4 server;
    if (ad) {
        server = d.world.servers[pick(d.rng, kAdServers)];
    } else {
        const double u = uniform(d.rng);
        const auto k = static_cast<std::size_t>(std::lower_bound(d.world.server_cdf.begin(), d.world.server_cdf.end(), u) -
                                                d.world.server_cdf.begin());
        server = d.world.servers[kAdServers + std::min(k, d.world.server_cdf.size() - 1)];
    }
    std::uint16_t server_port;
    if (udp) {
        static constexpr std::uint16_t ports[] = {53, 443, 123, 5353};
        server_port = ports[pick(d.rng, std::size(ports))];
    } else {
        server_port = bernoulli(d.rng, 0.75) ? 443 : 80;
    }
    const auto client_port = static_cast<std::uint16_t>(32768 + pick(d.rng, 28000));
    if (bernoulli(d.rng, 0.5)) {
        f.src_ip = d.ip;
        f.dst_ip = server;
        f.src_port = client_port;
        f.dst_port = server_port;
    } else {
        f.src_ip = server;
        f.dst_ip = d.ip;
        f.src_port = server_port;
        f.dst_port = client_port;
    }
    out.flows.push_back(f);
    ++truth.flows;
}

// E[B^-gamma] for B = 1 + gamma-Poisson(mean - 1, shape), capped at `cap`.
double mean_inverse_power(const DayClassParams& dc, double gamma, std::size_t cap) {
    const double mu = dc.buildings_mean - 1.0;
    if (mu <= 0 || gamma == 0) return 1.0;
    const double r = dc.buildings_shape;
    const double p = r / (r + mu);
    double total = 0, mass = 0;
    for (std::size_t k = 0; k + 1 < cap; ++k) {
        const double kd = static_cast<double>(k);
        const double pmf =
            std::exp(std::lgamma(kd + r) - std::lgamma(kd + 1) - std::lgamma(r) + r * std::log(p) + kd * std::log1p(-p));
        total += pmf * std::pow(kd + 1, -gamma);
        mass += pmf;
    }
    total += std::max(0.0, 1.0 - mass) * std::pow(static_cast<double>(cap), -gamma);
    return total;
}

void simulate_day(DeviceContext& d, DayKey day, Traces& out, DeviceTruth& truth) {
    const bool weekend = day.is_weekend();
    const auto& dc = weekend ? d.tp.weekend : d.tp.weekday;
    if (!bernoulli(d.rng, dc.active_prob)) return;
    ++truth.active_days;
    const Millis midnight = day.local_midnight(d.spec.tz_offset_minutes);
    const double start_h = std::clamp(dc.start_hour_mean + dc.start_hour_sd * normal(d.rng), 6.25, 15.0);
    const Millis start = midnight + static_cast<Millis>(start_h * 3600.0) * kMsPerSecond;
    const double presence_min =
        std::max(120.0, dc.presence_median_min * std::exp(dc.presence_sigma * normal(d.rng)));
    const Millis latest = midnight + (23 * 60 + 50) * kMsPerMinute;
    const Millis end = std::min(latest, start + static_cast<Millis>(presence_min * 60.0) * kMsPerSecond);

    // 1 + gamma-Poisson (negative binomial) distinct buildings.
    const double extra = dc.buildings_mean - 1.0;
    const double lambda = extra > 0 ? std::gamma_distribution<double>(dc.buildings_shape, extra / dc.buildings_shape)(d.rng) : 0.0;
    const auto nb = std::min<std::size_t>(d.world.buildings.size(), 1 + static_cast<std::size_t>(poisson(d.rng, lambda)));
    const auto chosen = choose_buildings(d, nb);

    // Dwell shares: preferred building first, the rest Dirichlet(1).
    std::vector<double> share(nb, 1.0);
    if (nb > 1) {
        const double conc = 6.0;
        const double pref = beta(d.rng, dc.preferred_share * conc, (1 - dc.preferred_share) * conc);
        double rest = 0;
        for (std::size_t i = 1; i < nb; ++i) rest += (share[i] = -std::log(1.0 - uniform(d.rng)));
        share[0] = pref;
        for (std::size_t i = 1; i < nb; ++i) share[i] = (1 - pref) * share[i] / rest;
    }
    struct Visit {
        std::size_t b;
        double share;
    };
    std::vector<Visit> visits;
    const bool split_pref = nb > 1 && bernoulli(d.rng, 0.5);
    visits.push_back({chosen[0], split_pref ? share[0] * 0.6 : share[0]});
    for (std::size_t i = 1; i < nb; ++i) visits.push_back({chosen[i], share[i]});
    if (split_pref) visits.push_back({chosen[0], share[0] * 0.4});

    std::vector<SessionPlan> sessions;
    const double span_s = static_cast<double>(end - start) / 1000.0;
    Millis t = start;
    for (std::size_t v = 0; v < visits.size(); ++v) {
        if (v > 0 && bernoulli(d.rng, d.tp.passby_prob)) passby_sessions(d, chosen, t, sessions);
        Millis vend = v + 1 == visits.size()
                          ? end
                          : t + std::max<Millis>(60, static_cast<Millis>(visits[v].share * span_s)) * kMsPerSecond;
        vend = std::min(vend, end);
        if (vend - t < 60 * kMsPerSecond) continue;
        visit_sessions(d, visits[v].b, t, vend, sessions);
        t = vend;
    }
    if (sessions.empty()) return;

    const auto lease_extra = [&] { return static_cast<Millis>(1 + pick(d.rng, 9)) * kMsPerSecond; };
    for (const auto& s : sessions) {
        const auto& ap = d.world.buildings[s.building].aps[s.ap];
        out.ap_events.push_back({d.ip, d.mac, ap.name, ap.mac, s.start, s.start + lease_extra()});
    }
    // Departure association: closes the last session; its own interval runs
    // into the next day and is dropped by the lease gap cap.
    const auto& last_ap = d.world.buildings[sessions.back().building].aps[sessions.back().ap];
    out.ap_events.push_back({d.ip, d.mac, last_ap.name, last_ap.mac, sessions.back().end,
                             sessions.back().end + lease_extra()});

    // Traffic.
    const double z = normal(d.rng);
    const double sn = d.tp.count_coupling, sb = d.tp.size_coupling;
    // Normalized so the mobility coupling leaves mean activity unchanged.
    const double mobility_factor = std::pow(static_cast<double>(nb), -d.tp.mobility_coupling) /
                                   mean_inverse_power(dc, d.tp.mobility_coupling, d.world.buildings.size());
    const double activity = d.activity * std::exp(sn * z - 0.5 * sn * sn) * mobility_factor;
    const double half = std::sqrt(activity);
    // The pooled median includes the shrunken UDP flows; shift to first order.
    const double udp_shift = -d.tp.udp_device_prob * d.tp.udp_share_mean * std::log(d.tp.udp_size_factor);
    const double log_size_mean = std::log(d.tp.size_median) + udp_shift + sb * sn - sb * z;
    const double size_sigma = std::sqrt(d.tp.size_sigma * d.tp.size_sigma - sb * sb);
    const Millis day_start = sessions.front().start, day_end = sessions.back().end;
    // Two anchor periods near the ends of the day keep every active day
    // spread over more than one hour; the rest are placed uniformly.
    const int periods = 2 + poisson(d.rng, dc.active_periods_mean * half);
    const auto span = static_cast<double>(day_end - day_start - 1);
    for (int p = 0; p < periods; ++p) {
        const double len_s = std::max(30.0, half * dc.period_median_s * std::exp(dc.period_sigma * normal(d.rng)));
        const auto len = static_cast<Millis>(len_s * 1000.0);
        Millis ps;
        if (p == 0)
            ps = day_start + static_cast<Millis>(uniform(d.rng, 0.0, 0.15) * span);
        else if (p == 1)
            ps = std::max(day_start, day_start + static_cast<Millis>(uniform(d.rng, 0.85, 1.0) * span) - len);
        else
            ps = day_start + static_cast<Millis>(uniform(d.rng) * span);
        const Millis pe = std::min(day_end, ps + len);
        for (Millis ft = ps; ft < pe;) {
            emit_flow(d, ft, sessions, log_size_mean, size_sigma, out, truth, false);
            const double gap = d.tp.iat_scale_s * beta(d.rng, d.tp.iat_alpha, d.tp.iat_beta);
            ft += std::max<Millis>(1, static_cast<Millis>(std::llround(gap * 1000.0)));
        }
    }
    if (bernoulli(d.rng, d.tp.admob_prob)) {
        const Millis at = day_start + static_cast<Millis>(uniform(d.rng) * static_cast<double>(day_end - day_start - 1));
        emit_flow(d, at, sessions, log_size_mean, size_sigma, out, truth, true);
    }
}

}  // namespace

Traces generate_traces(const PopulationSpec& spec) {
    spec.validate();
    Traces out;
    std::uint64_t stream = spec.seed;
    Rng world_rng(splitmix64(stream));
    const World world = build_world(spec, world_rng, out);
    const OuiPools pools = build_ouis(spec, world_rng, out);
    const DayKey first = DayKey::parse(spec.start_date);

    std::set<MacAddress> macs;
    std::size_t index = 0;
    for (auto type : {DeviceType::Flute, DeviceType::Cello}) {
        const auto& tp = spec.params(type);
        for (std::size_t i = 0; i < tp.devices; ++i, ++index) {
            DeviceContext d{spec, world, tp, type, {}, {}, Rng(splitmix64(stream)), {}, {}, false, 0};
            DeviceTruth truth;
            truth.type = type;
            const double u = uniform(d.rng);
            const std::vector<Oui>* pool;
            if (u < spec.ouis.unlabeled_share && !pools.unlabeled.at(type).empty()) {
                pool = &pools.unlabeled.at(type);
                truth.oui_group = "unlabeled";
            } else if (u < spec.ouis.unlabeled_share + spec.ouis.both_share && !pools.both.empty()) {
                pool = &pools.both;
                truth.oui_group = "both";
            } else {
                const auto ns = pools.survey.count(type) ? pools.survey.at(type).size() : 0;
                const auto nr = pools.registry.count(type) ? pools.registry.at(type).size() : 0;
                const bool survey = pick(d.rng, ns + nr) < ns;
                pool = survey ? &pools.survey.at(type) : &pools.registry.at(type);
                truth.oui_group = survey ? "survey" : "registry";
            }
            truth.oui = (*pool)[pick(d.rng, pool->size())];
            const std::uint64_t prefix = MacAddress::parse(truth.oui.str() + ":00:00:00").to_u64();
            do {
                d.mac = MacAddress::from_u64(prefix | pick(d.rng, 0x1000000));
            } while (!macs.insert(d.mac).second);
            d.ip = Ipv4((10u << 24) | (20u << 16) | static_cast<std::uint32_t>(index + 10));
            truth.mac = d.mac;
            truth.ip = d.ip;

            // Preference ranking: nearest to a random anchor, with jitter.
            const auto anchor = world.buildings[pick(d.rng, world.buildings.size())].pos;
            std::vector<std::pair<double, std::size_t>> order;
            for (std::size_t b = 0; b < world.buildings.size(); ++b) {
                const auto& p = world.buildings[b].pos;
                const double dist = std::hypot(p.x - anchor.x, p.y - anchor.y) + 50.0;
                order.emplace_back(dist * std::exp(0.35 * normal(d.rng)), b);
            }
            std::sort(order.begin(), order.end());
            for (std::size_t r = 0; r < order.size(); ++r) {
                d.ranking.push_back(order[r].second);
                d.rank_weight.push_back(std::pow(static_cast<double>(r + 1), -tp.zipf_exponent));
            }
            const double as = tp.device_activity_sigma;
            d.activity = std::exp(as * normal(d.rng) - 0.5 * as * as);
            d.uses_udp = bernoulli(d.rng, tp.udp_device_prob);
            if (d.uses_udp) {
                const double a = 4.0;
                d.udp_share = beta(d.rng, a, a * (1 - tp.udp_share_mean) / tp.udp_share_mean);
            }
            for (int day = 0; day < spec.days; ++day) simulate_day(d, DayKey(first.epoch_day() + day), out, truth);
            out.devices.push_back(truth);
        }
    }

    std::sort(out.ap_events.begin(), out.ap_events.end(), [](const ApEvent& a, const ApEvent& b) {
        return std::tie(a.lease_begin, a.user_mac, a.ap_mac) < std::tie(b.lease_begin, b.user_mac, b.ap_mac);
    });
    std::sort(out.flows.begin(), out.flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return std::tie(a.start, a.src_ip, a.dst_ip, a.src_port, a.dst_port, a.finish, a.flow_bytes, a.packet_count) <
               std::tie(b.start, b.src_ip, b.dst_ip, b.src_port, b.dst_port, b.finish, b.flow_bytes, b.packet_count);
    });

    out.expected["flute.size_median"] = spec.flute.size_median;
    out.expected["cello.size_median"] = spec.cello.size_median;
    out.expected["flute.zipf_exponent"] = spec.flute.zipf_exponent;
    out.expected["cello.zipf_exponent"] = spec.cello.zipf_exponent;
    for (auto type : {DeviceType::Flute, DeviceType::Cello}) {
        const auto& tp = spec.params(type);
        const std::string p = std::string(to_string(type)) + ".";
        out.expected[p + "iat_mean_s"] = tp.iat_scale_s * tp.iat_alpha / (tp.iat_alpha + tp.iat_beta);
        out.expected[p + "size_day_sigma"] = std::sqrt(tp.size_sigma * tp.size_sigma - tp.size_coupling * tp.size_coupling);
        out.expected[p + "size_day_log_mean"] = std::log(tp.size_median) + tp.size_coupling * tp.count_coupling;
    }
    out.expected["boundary_crossing_flows"] = 0;
    return out;
}

void write_manifest(std::ostream& out, const PopulationSpec& spec, const Traces& t) {
    PopulationSpec copy = spec;
    out << kTruthFormatTag << '\n';
    out << "[spec]\n";
    for (const auto& [key, target] : bindings(copy)) out << key << " = " << render(target) << '\n';
    out << "[expected]\n";
    for (const auto& [key, v] : t.expected) out << key << " = " << text::format_double(v) << '\n';
    out << "[totals]\n";
    out << "ap_events = " << t.ap_events.size() << '\n';
    out << "flows = " << t.flows.size() << '\n';
    out << "devices = " << t.devices.size() << '\n';
    out << "[devices]\n";
    out << "# mac,ip,type,oui,oui_group,active_days,flows\n";
    for (const auto& d : t.devices)
        out << d.mac.str() << ',' << d.ip.str() << ',' << to_string(d.type) << ',' << d.oui.str() << ','
            << d.oui_group << ',' << d.active_days << ',' << d.flows << '\n';
}

TraceFiles write_traces(const std::filesystem::path& dir, const PopulationSpec& spec, const Traces& t) {
    TraceFiles f{dir / "aplog.csv", dir / "netflow.csv", dir / "buildings.csv",
                 dir / "ouis.csv",  dir / "dns.csv",     dir / "truth.txt"};
    {
        auto o = io::open_output(f.aplog);
        ingest::write_ap_events(o, t.ap_events);
    }
    {
        auto o = io::open_output(f.netflow);
        ingest::write_netflow(o, t.flows);
    }
    {
        auto o = io::open_output(f.buildings);
        ingest::write_building_registry(o, t.registry);
    }
    {
        auto o = io::open_output(f.ouis);
        ingest::write_oui_labels(o, t.labels);
    }
    {
        auto o = io::open_output(f.dns);
        ingest::write_dns_map(o, t.dns);
    }
    {
        auto o = io::open_output(f.truth);
        write_manifest(o, spec, t);
    }
    return f;
}

std::vector<features::FeatureRow> synthesize_features(const std::map<DeviceType, learn::GmmModel>& models,
                                                      std::size_t n_per_type, std::uint64_t seed) {
    const auto names = features::all_names();
    std::vector<features::FeatureRow> rows;
    std::uint64_t stream = seed;
    for (const auto& [type, model] : models) {
        if (model.feature_names != names)
            throw Error(Errc::ModelFeatureMismatch,
                        fmt::format("{} model features do not match the combined feature list", to_string(type)));
        const Eigen::MatrixXd x = model.sample(n_per_type, splitmix64(stream));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            features::FeatureRow r;
            r.type = type;
            std::array<double, 8> m{};
            std::array<double, 11> t{};
            for (Eigen::Index j = 0; j < 8; ++j) m[static_cast<std::size_t>(j)] = x(i, j);
            for (Eigen::Index j = 0; j < 11; ++j) t[static_cast<std::size_t>(j)] = x(i, 8 + j);
            r.mobility = MobilityFeatures::from_values(m);
            r.traffic = TrafficFeatures::from_values(t);
            rows.push_back(r);
        }
    }
    return rows;
}

}  // namespace flames::synth
