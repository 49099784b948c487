#pragma once

// Traffic characterization: per-flow statistics, AP-level IAT and load,
// protocol shares, and per-device daily usage features.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "flames/core.hpp"

namespace flames::traffic {

struct Summary {
    std::size_t n = 0;
    double mean = 0;
    double median = 0;
    double std = 0;  // sample (n - 1)
};

Summary summarize(std::span<const double> xs);

struct FlowStats {
    std::size_t flows = 0;
    Summary bytes;
    Summary packet_size;  // bytes per packet, per flow
    Summary packets;
    Summary runtime_ms;
    // Samples removed by the IQR fence, per metric in the order above.
    std::array<std::size_t, 4> removed{};
};

// Statistics over one group of flows; each metric is IQR-filtered on its own
// sample first when `iqr` is set. Throws Error{EmptyGroup}.
FlowStats flow_level_stats(std::span<const CoreFlow> flows, bool iqr = true);

struct GroupKey {
    DeviceType type = DeviceType::Unknown;
    bool weekend = false;
    auto operator<=>(const GroupKey&) const = default;
};

// Splits by device type x day class (Unknown devices are skipped) and runs
// flow_level_stats per non-empty group.
std::map<GroupKey, FlowStats> flow_level_stats_by_group(std::span<const CoreFlow> flows, int tz_offset_minutes,
                                                        bool iqr = true);

struct ApIat {
    // Millisecond gaps between successive flow starts per (AP, day, type) stream.
    std::map<DeviceType, std::vector<double>> samples;
    std::uint64_t streams = 0;
    std::uint64_t skipped_streams = 0;  // fewer than two flows
};

ApIat iat_per_ap(std::span<const CoreFlow> flows, int tz_offset_minutes);

struct ProtocolShares {
    // Indexed by Protocol.
    std::array<double, 3> flow_share{};
    std::array<double, 3> byte_share{};
    std::size_t flows = 0;
};

ProtocolShares protocol_split(std::span<const CoreFlow> flows);

struct ApDayLoad {
    std::uint64_t flows = 0;
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
};

struct ApLoadReport {
    // (ap, day) -> per type (Flute, Cello) load.
    std::map<std::pair<MacAddress, DayKey>, std::array<ApDayLoad, 2>> loads;
    std::vector<MacAddress> aps;
    std::vector<DayKey> days;

    // Mean over days of the class of the fraction of APs without flows of `type`.
    double zero_flow_fraction(DeviceType type, bool weekend) const;
    // Per-AP-day values including zero days, for CDFs.
    std::vector<double> daily_bytes(DeviceType type, bool weekend) const;
    std::vector<double> daily_packets(DeviceType type, bool weekend) const;
};

// `aps` and `days` define the universe for zero-load accounting; when empty
// they are taken from the flows.
ApLoadReport ap_daily_load(std::span<const CoreFlow> flows, int tz_offset_minutes, std::vector<MacAddress> aps = {},
                           std::vector<DayKey> days = {});

struct ActiveTime {
    double tat = 0;  // minutes
    double aat = 0;  // minutes
    std::size_t periods = 0;
};

// Merges [start, finish] intervals, coalescing gaps of at most `gap`.
ActiveTime active_time(std::span<const FlowRecord> flows, Millis gap = 60 * kMsPerSecond);

struct TrafficOptions {
    int tz_offset_minutes = kDefaultTzOffsetMinutes;
    Millis active_gap = 60 * kMsPerSecond;
};

// Features of one device-day. sfc is the population std of per-hour flow
// counts over the hours from the first to the last active hour. Empty input
// yields all zeros.
TrafficFeatures user_daily_traffic(std::span<const FlowRecord> flows, const TrafficOptions& opts = {});

struct DailyTrafficRow {
    MacAddress device;
    DayKey day;
    DeviceType type = DeviceType::Unknown;
    TrafficFeatures features;
};

std::vector<DailyTrafficRow> daily_traffic_table(std::span<const CoreFlow> core, const TrafficOptions& opts = {});

// Empirical CDF as (x, F(x)) at each distinct value.
std::vector<std::pair<double, double>> ecdf(std::vector<double> xs);
// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> xs, double q);

}  // namespace flames::traffic
