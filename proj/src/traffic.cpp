#include "flames/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "flames/error.hpp"
#include "flames/fuse.hpp"
#include "flames/stats.hpp"

namespace flames::traffic {

Summary summarize(std::span<const double> xs) {
    Summary s;
    s.n = xs.size();
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    s.median = stats::quantile_sorted(stats::sorted_copy(xs), 0.5);
    return s;
}

FlowStats flow_level_stats(std::span<const CoreFlow> flows, bool iqr) {
    if (flows.empty()) throw Error(Errc::EmptyGroup, "no flows in group");
    std::array<std::vector<double>, 4> cols;
    for (auto& c : cols) c.reserve(flows.size());
    for (const auto& c : flows) {
        const auto& f = c.flow;
        cols[0].push_back(static_cast<double>(f.flow_bytes));
        if (f.packet_count > 0) cols[1].push_back(static_cast<double>(f.flow_bytes) / static_cast<double>(f.packet_count));
        cols[2].push_back(static_cast<double>(f.packet_count));
        cols[3].push_back(static_cast<double>(f.finish - f.start));
    }
    FlowStats out;
    out.flows = flows.size();
    std::array<Summary*, 4> dst = {&out.bytes, &out.packet_size, &out.packets, &out.runtime_ms};
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (iqr) {
            auto filtered = stats::iqr_filter(cols[i]);
            out.removed[i] = filtered.removed;
            *dst[i] = summarize(filtered.retained);
        } else {
            *dst[i] = summarize(cols[i]);
        }
    }
    return out;
}

std::map<GroupKey, FlowStats> flow_level_stats_by_group(std::span<const CoreFlow> flows, int tz_offset_minutes,
                                                        bool iqr) {
    std::map<GroupKey, std::vector<CoreFlow>> groups;
    for (const auto& c : flows) {
        if (c.device_type == DeviceType::Unknown) continue;
        groups[{c.device_type, DayKey::from_millis(c.flow.start, tz_offset_minutes).is_weekend()}].push_back(c);
    }
    std::map<GroupKey, FlowStats> out;
    for (const auto& [key, group] : groups) out.emplace(key, flow_level_stats(group, iqr));
    return out;
}

ApIat iat_per_ap(std::span<const CoreFlow> flows, int tz_offset_minutes) {
    std::map<std::tuple<MacAddress, DayKey, DeviceType>, std::vector<Millis>> streams;
    for (const auto& c : flows)
        streams[{c.ap_mac, DayKey::from_millis(c.flow.start, tz_offset_minutes), c.device_type}].push_back(c.flow.start);
    ApIat out;
    for (auto& [key, starts] : streams) {
        ++out.streams;
        if (starts.size() < 2) {
            ++out.skipped_streams;
            continue;
        }
        std::sort(starts.begin(), starts.end());
        auto& dst = out.samples[std::get<2>(key)];
        for (std::size_t i = 1; i < starts.size(); ++i) dst.push_back(static_cast<double>(starts[i] - starts[i - 1]));
    }
    return out;
}

ProtocolShares protocol_split(std::span<const CoreFlow> flows) {
    ProtocolShares s;
    std::array<double, 3> n{}, b{};
    double total_bytes = 0;
    for (const auto& c : flows) {
        const auto p = static_cast<std::size_t>(c.flow.protocol);
        n[p] += 1;
        b[p] += static_cast<double>(c.flow.flow_bytes);
        total_bytes += static_cast<double>(c.flow.flow_bytes);
    }
    s.flows = flows.size();
    for (std::size_t p = 0; p < 3; ++p) {
        s.flow_share[p] = s.flows ? n[p] / static_cast<double>(s.flows) : 0.0;
        s.byte_share[p] = total_bytes > 0 ? b[p] / total_bytes : 0.0;
    }
    return s;
}

namespace {

int type_slot(DeviceType t) { return t == DeviceType::Flute ? 0 : t == DeviceType::Cello ? 1 : -1; }

}  // namespace

ApLoadReport ap_daily_load(std::span<const CoreFlow> flows, int tz_offset_minutes, std::vector<MacAddress> aps,
                           std::vector<DayKey> days) {
    ApLoadReport r;
    std::set<MacAddress> ap_set(aps.begin(), aps.end());
    std::set<DayKey> day_set(days.begin(), days.end());
    const bool derive_aps = aps.empty();
    const bool derive_days = days.empty();
    for (const auto& c : flows) {
        const auto day = DayKey::from_millis(c.flow.start, tz_offset_minutes);
        if (derive_aps) ap_set.insert(c.ap_mac);
        if (derive_days) day_set.insert(day);
        const int slot = type_slot(c.device_type);
        if (slot < 0) continue;
        auto& load = r.loads[{c.ap_mac, day}][static_cast<std::size_t>(slot)];
        ++load.flows;
        load.packets += c.flow.packet_count;
        load.bytes += c.flow.flow_bytes;
    }
    r.aps.assign(ap_set.begin(), ap_set.end());
    r.days.assign(day_set.begin(), day_set.end());
    return r;
}

double ApLoadReport::zero_flow_fraction(DeviceType type, bool weekend) const {
    const int slot = type_slot(type);
    if (slot < 0 || aps.empty()) return 0.0;
    double sum = 0;
    std::size_t ndays = 0;
    for (const auto& day : days) {
        if (day.is_weekend() != weekend) continue;
        ++ndays;
        std::size_t zero = 0;
        for (const auto& ap : aps) {
            auto it = loads.find({ap, day});
            if (it == loads.end() || it->second[static_cast<std::size_t>(slot)].flows == 0) ++zero;
        }
        sum += static_cast<double>(zero) / static_cast<double>(aps.size());
    }
    return ndays ? sum / static_cast<double>(ndays) : 0.0;
}

namespace {

template <class Get>
std::vector<double> per_ap_day(const ApLoadReport& r, DeviceType type, bool weekend, Get get) {
    std::vector<double> out;
    const int slot = type_slot(type);
    if (slot < 0) return out;
    for (const auto& day : r.days) {
        if (day.is_weekend() != weekend) continue;
        for (const auto& ap : r.aps) {
            auto it = r.loads.find({ap, day});
            out.push_back(it == r.loads.end() ? 0.0 : get(it->second[static_cast<std::size_t>(slot)]));
        }
    }
    return out;
}

}  // namespace

std::vector<double> ApLoadReport::daily_bytes(DeviceType type, bool weekend) const {
    return per_ap_day(*this, type, weekend, [](const ApDayLoad& l) { return static_cast<double>(l.bytes); });
}

std::vector<double> ApLoadReport::daily_packets(DeviceType type, bool weekend) const {
    return per_ap_day(*this, type, weekend, [](const ApDayLoad& l) { return static_cast<double>(l.packets); });
}

ActiveTime active_time(std::span<const FlowRecord> flows, Millis gap) {
    ActiveTime at;
    if (flows.empty()) return at;
    std::vector<std::pair<Millis, Millis>> iv;
    iv.reserve(flows.size());
    for (const auto& f : flows) iv.emplace_back(f.start, f.finish);
    std::sort(iv.begin(), iv.end());
    Millis total = 0;
    Millis cur_start = iv[0].first, cur_end = iv[0].second;
    for (std::size_t i = 1; i < iv.size(); ++i) {
        if (iv[i].first - cur_end <= gap) {
            cur_end = std::max(cur_end, iv[i].second);
        } else {
            total += cur_end - cur_start;
            ++at.periods;
            cur_start = iv[i].first;
            cur_end = iv[i].second;
        }
    }
    total += cur_end - cur_start;
    ++at.periods;
    at.tat = static_cast<double>(total) / static_cast<double>(kMsPerMinute);
    at.aat = at.tat / static_cast<double>(at.periods);
    return at;
}

TrafficFeatures user_daily_traffic(std::span<const FlowRecord> flows, const TrafficOptions& opts) {
    TrafficFeatures t;
    if (flows.empty()) return t;
    std::vector<double> sizes;
    std::vector<Millis> starts;
    sizes.reserve(flows.size());
    starts.reserve(flows.size());
    double udp_bytes = 0, udp_flows = 0;
    std::array<double, 24> per_hour{};
    int first_hour = 24, last_hour = -1;
    for (const auto& f : flows) {
        const auto b = static_cast<double>(f.flow_bytes);
        sizes.push_back(b);
        starts.push_back(f.start);
        t.tby += b;
        if (f.protocol == Protocol::Udp) {
            udp_bytes += b;
            udp_flows += 1;
        }
        const int h = local_hour(f.start, opts.tz_offset_minutes);
        per_hour[static_cast<std::size_t>(h)] += 1;
        first_hour = std::min(first_hour, h);
        last_hour = std::max(last_hour, h);
    }
    const auto s = summarize(sizes);
    t.aby = s.mean;
    t.sby = s.std;
    t.tfc = static_cast<double>(flows.size());
    t.rub = t.tby > 0 ? udp_bytes / t.tby : 0.0;
    t.ruf = udp_flows / t.tfc;

    const double span_hours = static_cast<double>(last_hour - first_hour + 1);
    double mean_h = 0;
    for (int h = first_hour; h <= last_hour; ++h) mean_h += per_hour[static_cast<std::size_t>(h)];
    mean_h /= span_hours;
    double var_h = 0;
    for (int h = first_hour; h <= last_hour; ++h) {
        const double d = per_hour[static_cast<std::size_t>(h)] - mean_h;
        var_h += d * d;
    }
    t.sfc = std::sqrt(var_h / span_hours);

    std::sort(starts.begin(), starts.end());
    std::vector<double> iat;
    iat.reserve(starts.size());
    for (std::size_t i = 1; i < starts.size(); ++i) iat.push_back(static_cast<double>(starts[i] - starts[i - 1]) / 1000.0);
    const auto is = summarize(iat);
    t.ait = is.mean;
    t.sit = is.std;

    const auto at = active_time(flows, opts.active_gap);
    t.tat = at.tat;
    t.aat = at.aat;
    return t;
}

std::vector<DailyTrafficRow> daily_traffic_table(std::span<const CoreFlow> core, const TrafficOptions& opts) {
    auto days = fuse::partition_days(core, opts.tz_offset_minutes);
    std::vector<DailyTrafficRow> rows;
    rows.reserve(days.size());
    std::vector<FlowRecord> flows;
    for (const auto& [key, group] : days) {
        flows.clear();
        for (const auto& c : group) flows.push_back(c.flow);
        DailyTrafficRow row{key.device, key.day, group.front().device_type, user_daily_traffic(flows, opts)};
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::pair<double, double>> ecdf(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    std::vector<std::pair<double, double>> out;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i + 1 < xs.size() && xs[i + 1] == xs[i]) continue;
        out.emplace_back(xs[i], static_cast<double>(i + 1) / n);
    }
    return out;
}

double quantile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    return stats::quantile_sorted(xs, q);
}

}  // namespace flames::traffic
