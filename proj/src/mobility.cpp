#include "flames/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <unordered_map>

#include "flames/error.hpp"

namespace flames::mobility {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double minutes(Millis ms) { return static_cast<double>(ms) / static_cast<double>(kMsPerMinute); }

}  // namespace

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2);
    const double s2 = std::sin(dlambda / 2);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

Vec2 project(const GeoPoint& p, const GeoPoint& origin) {
    const double x = (p.lon - origin.lon) * kDegToRad * kEarthRadiusM * std::cos(origin.lat * kDegToRad);
    const double y = (p.lat - origin.lat) * kDegToRad * kEarthRadiusM;
    return {x, y};
}

Trajectory daily_trajectory_metrics(std::span<const GeoPoint> positions) {
    std::vector<GeoPoint> path;
    path.reserve(positions.size());
    for (const auto& p : positions)
        if (path.empty() || !(path.back() == p)) path.push_back(p);
    Trajectory t;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double d = haversine_m(path[i - 1], path[i]);
        t.ljm = std::max(t.ljm, d);
        t.tjm += d;
    }
    for (std::size_t i = 0; i < path.size(); ++i)
        for (std::size_t j = i + 1; j < path.size(); ++j) t.dia = std::max(t.dia, haversine_m(path[i], path[j]));
    return t;
}

double radius_of_gyration(std::span<const Vec2> positions, std::span<const double> weights) {
    if (positions.empty()) return 0.0;
    std::vector<double> w(positions.size(), 1.0);
    if (weights.size() == positions.size()) {
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (total > 0) w.assign(weights.begin(), weights.end());
    }
    const double n = std::accumulate(w.begin(), w.end(), 0.0);
    double cx = 0, cy = 0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        cx += w[i] * positions[i].x;
        cy += w[i] * positions[i].y;
    }
    cx /= n;
    cy /= n;
    double ss = 0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double dx = positions[i].x - cx;
        const double dy = positions[i].y - cy;
        ss += w[i] * (dx * dx + dy * dy);
    }
    return std::sqrt(ss / n);
}

std::vector<Session> sessions_from_leases(std::span<const Lease> leases) {
    std::vector<Session> out;
    out.reserve(leases.size());
    for (const auto& l : leases) out.push_back({l.mac, l.ap_mac, l.building_id, l.start, l.end});
    return out;
}

Visitation visitation_metrics(std::span<const Session> sessions) {
    Visitation v;
    std::map<BuildingId, Millis> per_building;
    std::set<MacAddress> aps;
    Millis total = 0;
    for (const auto& s : sessions) {
        aps.insert(s.ap);
        total += s.duration();
        if (s.building) per_building[*s.building] += s.duration();
    }
    v.apc = aps.size();
    v.bld = per_building.size();
    v.dlt = minutes(total);
    Millis best = -1;
    // std::map iterates ids ascending, so the first maximum is the smallest id.
    for (const auto& [id, t] : per_building) {
        if (t > best) {
            best = t;
            v.preferred = id;
        }
    }
    if (best >= 0) v.pdt = minutes(best);
    return v;
}

MobilityFeatures daily_mobility(std::span<const Session> sessions, const ingest::BuildingRegistry& registry,
                                const MobilityOptions& opts) {
    MobilityFeatures m;
    std::vector<GeoPoint> positions;
    std::vector<double> weights;
    for (const auto& s : sessions) {
        if (!s.building) continue;
        const Building* b = registry.find(*s.building);
        if (!b) continue;
        positions.push_back({b->lat, b->lon});
        weights.push_back(static_cast<double>(s.duration()) / 1000.0);
    }
    auto traj = daily_trajectory_metrics(positions);
    m.ljm = traj.ljm;
    m.dia = traj.dia;
    m.tjm = traj.tjm;
    if (!positions.empty()) {
        std::vector<Vec2> planar;
        planar.reserve(positions.size());
        for (const auto& p : positions) planar.push_back(project(p, positions.front()));
        m.gyr = opts.dwell_weighted_gyration ? radius_of_gyration(planar, weights) : radius_of_gyration(planar);
    }

    Visitation v;
    if (opts.ap_granularity) {
        // Map each AP to a synthetic location id so that bld/pdt count APs.
        std::map<MacAddress, BuildingId> ids;
        std::vector<Session> relabeled(sessions.begin(), sessions.end());
        for (auto& s : relabeled) {
            auto [it, _] = ids.emplace(s.ap, static_cast<BuildingId>(ids.size()));
            s.building = it->second;
        }
        v = visitation_metrics(relabeled);
    } else {
        v = visitation_metrics(sessions);
    }
    m.bld = static_cast<double>(v.bld);
    m.apc = static_cast<double>(v.apc);
    m.pdt = v.pdt;
    m.dlt = v.dlt;
    return m;
}

std::vector<DailyMobilityRow> daily_mobility_table(std::span<const Session> sessions,
                                                   const ingest::BuildingRegistry& registry,
                                                   const MobilityOptions& opts) {
    std::map<std::pair<MacAddress, DayKey>, std::vector<Session>> groups;
    for (const auto& s : sessions) groups[{s.device, DayKey::from_millis(s.start, opts.tz_offset_minutes)}].push_back(s);
    std::vector<DailyMobilityRow> rows;
    rows.reserve(groups.size());
    for (auto& [key, group] : groups) {
        std::sort(group.begin(), group.end(), [](const Session& a, const Session& b) {
            return std::tie(a.start, a.end, a.ap) < std::tie(b.start, b.end, b.ap);
        });
        rows.push_back({key.first, key.second, daily_mobility(group, registry, opts)});
    }
    return rows;
}

SessionStartHistogram session_start_histogram(std::span<const Session> sessions,
                                              const ingest::BuildingRegistry& registry, int tz_offset_minutes,
                                              int bins) {
    std::map<BuildingCategory, std::vector<double>> counts;
    std::set<BuildingCategory> present;
    for (const auto& [id, b] : registry.buildings) present.insert(b.category);
    for (const auto& s : sessions) {
        if (!s.building) continue;
        const Building* b = registry.find(*s.building);
        if (!b) continue;
        auto& c = counts[b->category];
        if (c.empty()) c.assign(static_cast<std::size_t>(bins), 0.0);
        const Millis local = s.start + static_cast<Millis>(tz_offset_minutes) * kMsPerMinute;
        const Millis in_day = ((local % kMsPerDay) + kMsPerDay) % kMsPerDay;
        auto bin = static_cast<std::size_t>(in_day * bins / kMsPerDay);
        c[std::min(bin, static_cast<std::size_t>(bins - 1))] += 1.0;
    }
    SessionStartHistogram out;
    for (auto cat : kAllCategories) {
        auto it = counts.find(cat);
        if (it == counts.end()) {
            if (present.count(cat)) out.empty_categories.push_back(cat);
            continue;
        }
        const double total = std::accumulate(it->second.begin(), it->second.end(), 0.0);
        CategoryHistogram h{cat, it->second, static_cast<std::size_t>(total)};
        for (auto& x : h.pdf) x /= total;
        out.categories.push_back(std::move(h));
    }
    return out;
}

std::vector<std::size_t> visited_locations_curve(std::span<const Session> device_sessions, int tz_offset_minutes) {
    std::vector<Session> sorted(device_sessions.begin(), device_sessions.end());
    std::sort(sorted.begin(), sorted.end(), [](const Session& a, const Session& b) { return a.start < b.start; });
    std::vector<std::size_t> curve;
    if (sorted.empty()) return curve;
    const auto first = DayKey::from_millis(sorted.front().start, tz_offset_minutes).epoch_day();
    const auto last = DayKey::from_millis(sorted.back().start, tz_offset_minutes).epoch_day();
    curve.assign(static_cast<std::size_t>(last - first + 1), 0);
    std::set<BuildingId> seen;
    std::size_t k = 0;
    for (std::int32_t d = first; d <= last; ++d) {
        while (k < sorted.size() && DayKey::from_millis(sorted[k].start, tz_offset_minutes).epoch_day() <= d) {
            if (sorted[k].building) seen.insert(*sorted[k].building);
            ++k;
        }
        curve[static_cast<std::size_t>(d - first)] = seen.size();
    }
    return curve;
}

VisitedCurves aggregate_visited_curves(const std::vector<std::vector<std::size_t>>& curves) {
    VisitedCurves out;
    std::size_t len = 0;
    for (const auto& c : curves) len = std::max(len, c.size());
    out.mean.assign(len, 0.0);
    out.median.assign(len, 0.0);
    std::vector<double> column;
    for (std::size_t t = 0; t < len; ++t) {
        column.clear();
        for (const auto& c : curves)
            if (!c.empty()) column.push_back(static_cast<double>(t < c.size() ? c[t] : c.back()));
        if (column.empty()) continue;
        out.mean[t] = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(column.size());
        std::sort(column.begin(), column.end());
        const auto n = column.size();
        out.median[t] = n % 2 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    }
    return out;
}

std::vector<std::size_t> detect_slope_changes(std::span<const double> curve, std::size_t window, double ratio) {
    std::vector<std::size_t> out;
    if (curve.size() < 2 * window + 1) return out;
    std::vector<double> inc(curve.size(), 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i) inc[i] = curve[i] - curve[i - 1];
    // Within each run of qualifying days keep the one with the sharpest drop.
    std::optional<std::size_t> best;
    double best_drop = 0;
    for (std::size_t t = window; t + window < curve.size(); ++t) {
        double before = 0, after = 0;
        for (std::size_t k = 1; k <= window; ++k) {
            before += inc[t + 1 - k];
            after += inc[t + k];
        }
        if (before > 0 && after < ratio * before) {
            if (!best || before - after > best_drop) {
                best = t;
                best_drop = before - after;
            }
        } else if (best) {
            out.push_back(*best);
            best.reset();
        }
    }
    if (best) out.push_back(*best);
    return out;
}

ZipfFit zipf_rank_table(const std::vector<std::vector<std::uint64_t>>& visit_counts, const ZipfOptions& opts) {
    ZipfFit fit;
    std::size_t max_rank = 0;
    std::size_t devices = 0;
    for (const auto& c : visit_counts) {
        const auto total = std::accumulate(c.begin(), c.end(), std::uint64_t{0});
        if (total == 0) continue;
        ++devices;
        max_rank = std::max(max_rank, std::min(c.size(), opts.max_rank));
    }
    fit.rank_probability.assign(max_rank, 0.0);
    fit.rank_support.assign(max_rank, 0);
    std::vector<std::uint64_t> sorted;
    for (const auto& c : visit_counts) {
        const auto total = std::accumulate(c.begin(), c.end(), std::uint64_t{0});
        if (total == 0) continue;
        sorted.assign(c.begin(), c.end());
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        for (std::size_t r = 0; r < std::min(sorted.size(), max_rank); ++r) {
            if (sorted[r] == 0) break;
            fit.rank_probability[r] += static_cast<double>(sorted[r]) / static_cast<double>(total);
            ++fit.rank_support[r];
        }
    }
    // Averaged over every device: a device lacking rank L contributes zero.
    for (auto& p : fit.rank_probability) p /= static_cast<double>(std::max<std::size_t>(devices, 1));
    return fit;
}

ZipfFit zipf_rank_fit(const std::vector<std::vector<std::uint64_t>>& visit_counts, const ZipfOptions& opts) {
    ZipfFit fit = zipf_rank_table(visit_counts, opts);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < fit.rank_probability.size(); ++r) {
        if (fit.rank_support[r] < opts.min_devices || fit.rank_probability[r] <= 0) break;
        const double x = std::log(static_cast<double>(r + 1));
        const double y = std::log(fit.rank_probability[r]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    fit.fitted_ranks = n;
    if (n < 3) throw Error(Errc::InsufficientRanks, "fewer than 3 ranks with enough support for a rank fit");
    const double dn = static_cast<double>(n);
    const double slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
    fit.beta = -slope;
    return fit;
}

std::vector<std::vector<std::uint64_t>> location_visit_counts(std::span<const Session> sessions, bool by_ap) {
    std::map<MacAddress, std::map<std::uint64_t, std::uint64_t>> counts;
    for (const auto& s : sessions) {
        if (by_ap) {
            ++counts[s.device][s.ap.to_u64()];
        } else if (s.building) {
            ++counts[s.device][static_cast<std::uint64_t>(static_cast<std::uint32_t>(*s.building))];
        }
    }
    std::vector<std::vector<std::uint64_t>> out;
    out.reserve(counts.size());
    for (const auto& [dev, m] : counts) {
        std::vector<std::uint64_t> v;
        v.reserve(m.size());
        for (const auto& [loc, c] : m) v.push_back(c);
        out.push_back(std::move(v));
    }
    return out;
}

DurationKernel session_duration_kernel(std::span<const Session> sessions, const KernelOptions& opts) {
    if (sessions.empty()) throw Error(Errc::EmptyInput, "no sessions for the duration kernel");
    DurationKernel k;
    const double lo = std::log10(opts.min_seconds);
    const double hi = std::log10(opts.max_seconds);
    const int nbins = std::max(1, static_cast<int>(std::ceil((hi - lo) * opts.bins_per_decade)));
    k.edges.resize(static_cast<std::size_t>(nbins) + 1);
    for (int i = 0; i <= nbins; ++i)
        k.edges[static_cast<std::size_t>(i)] = std::pow(10.0, lo + (hi - lo) * i / nbins);
    k.pdf.assign(static_cast<std::size_t>(nbins), 0.0);
    std::size_t idle = 0;
    for (const auto& s : sessions) {
        const double d = static_cast<double>(s.duration()) / 1000.0;
        if (std::abs(d - opts.idle_timeout_seconds) <= opts.idle_tolerance_seconds) ++idle;
        auto it = std::upper_bound(k.edges.begin(), k.edges.end(), d);
        auto bin = static_cast<std::ptrdiff_t>(it - k.edges.begin()) - 1;
        bin = std::clamp<std::ptrdiff_t>(bin, 0, nbins - 1);
        k.pdf[static_cast<std::size_t>(bin)] += 1.0;
    }
    k.count = sessions.size();
    for (auto& p : k.pdf) p /= static_cast<double>(k.count);
    k.five_minute_mass = static_cast<double>(idle) / static_cast<double>(k.count);
    return k;
}

PassByResult detect_passby_aps(const std::vector<std::vector<Session>>& per_device_sessions, double threshold_seconds) {
    PassByResult r;
    const auto threshold = static_cast<Millis>(threshold_seconds * 1000.0);
    for (const auto& seq : per_device_sessions) {
        for (const auto& s : seq) ++r.total_sessions[s.ap];
        for (std::size_t i = 0; i + 2 < seq.size(); ++i) {
            const auto& a = seq[i];
            const auto& b = seq[i + 1];
            const auto& c = seq[i + 2];
            if (a.ap == b.ap || b.ap == c.ap || a.ap == c.ap) continue;
            if (a.duration() >= threshold || b.duration() >= threshold || c.duration() >= threshold) continue;
            ++r.passby_count[a.ap];
            ++r.passby_count[b.ap];
            ++r.passby_count[c.ap];
        }
    }
    for (const auto& [ap, n] : r.passby_count) r.score[ap] = static_cast<double>(n) / static_cast<double>(r.total_sessions[ap]);
    return r;
}

std::vector<double> return_probability(const std::vector<std::vector<Session>>& per_device_sessions,
                                       const ReturnOptions& opts) {
    std::vector<double> hist(static_cast<std::size_t>(opts.horizon_hours) + 1, 0.0);
    double total = 0;
    for (const auto& seq : per_device_sessions) {
        // Visits: maximal runs of consecutive sessions at one location.
        std::map<std::uint64_t, std::vector<Millis>> visits;
        std::optional<std::uint64_t> prev;
        for (const auto& s : seq) {
            std::optional<std::uint64_t> loc;
            if (opts.by_ap)
                loc = s.ap.to_u64();
            else if (s.building)
                loc = static_cast<std::uint32_t>(*s.building);
            if (loc && loc != prev) visits[*loc].push_back(s.start);
            prev = loc;
        }
        for (const auto& [loc, starts] : visits) {
            for (std::size_t i = 0; i < starts.size(); ++i) {
                for (std::size_t j = i + 1; j < starts.size(); ++j) {
                    const double hours = static_cast<double>(starts[j] - starts[i]) / static_cast<double>(kMsPerHour);
                    const auto lag = static_cast<long long>(std::llround(hours));
                    if (lag > opts.horizon_hours) break;
                    hist[static_cast<std::size_t>(lag)] += 1.0;
                    total += 1.0;
                }
            }
        }
    }
    if (total == 0) return {};
    for (auto& h : hist) h /= total;
    return hist;
}

HourlyCurves hourly_association_curves(std::span<const ApEvent> events,
                                       const std::function<DeviceType(const MacAddress&)>& type_of,
                                       int tz_offset_minutes) {
    std::map<std::pair<MacAddress, DayKey>, std::uint32_t> hours;
    for (const auto& e : events)
        hours[{e.user_mac, DayKey::from_millis(e.lease_begin, tz_offset_minutes)}] |=
            1u << local_hour(e.lease_begin, tz_offset_minutes);
    HourlyCurves out;
    std::array<double, 24> flute{}, cello{};
    double n_flute = 0, n_cello = 0;
    for (const auto& [key, mask] : hours) {
        const auto t = type_of ? type_of(key.first) : DeviceType::Unknown;
        if (t == DeviceType::Unknown) continue;
        auto& acc = t == DeviceType::Flute ? flute : cello;
        (t == DeviceType::Flute ? n_flute : n_cello) += 1.0;
        for (int h = 0; h < 24; ++h)
            if (mask & (1u << h)) acc[static_cast<std::size_t>(h)] += 1.0;
        const int stay = std::popcount(mask);
        out.stay_difference[static_cast<std::size_t>(stay - 1)] += t == DeviceType::Flute ? 1 : -1;
    }
    for (std::size_t h = 0; h < 24; ++h) {
        out.flute_fraction[h] = n_flute > 0 ? flute[h] / n_flute : 0.0;
        out.cello_fraction[h] = n_cello > 0 ? cello[h] / n_cello : 0.0;
    }
    return out;
}

}  // namespace flames::mobility
