#pragma once

// Mobility metrics over association sessions: trajectory extent, radius of
// gyration, visitation, rank-frequency, session kernels, pass-by APs,
// return times and hourly presence.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "flames/core.hpp"
#include "flames/ingest.hpp"

namespace flames::mobility {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
    double lat = 0;  // degrees
    double lon = 0;
    bool operator==(const GeoPoint&) const = default;
};

struct Vec2 {
    double x = 0;  // meters east
    double y = 0;  // meters north
};

double haversine_m(const GeoPoint& a, const GeoPoint& b);

// Equirectangular projection around `origin`; adequate at campus scale.
Vec2 project(const GeoPoint& p, const GeoPoint& origin);

struct Trajectory {
    double ljm = 0;
    double dia = 0;
    double tjm = 0;
};

// Positions in visiting order. Repeated consecutive positions are not trips.
Trajectory daily_trajectory_metrics(std::span<const GeoPoint> positions);

// sqrt of the weighted mean squared distance from the weighted centroid.
// Empty weights, or weights summing to zero, fall back to equal weights.
double radius_of_gyration(std::span<const Vec2> positions, std::span<const double> weights = {});

// A session as used by the metrics here; one per lease.
struct Session {
    MacAddress device;
    MacAddress ap;
    std::optional<BuildingId> building;
    Millis start = 0;
    Millis end = 0;
    Millis duration() const { return end - start; }
};

std::vector<Session> sessions_from_leases(std::span<const Lease> leases);

struct Visitation {
    std::size_t bld = 0;
    std::size_t apc = 0;
    double pdt = 0;  // minutes
    double dlt = 0;  // minutes
    std::optional<BuildingId> preferred;
};

// Sessions of one device-day. Sessions without a building count towards
// apc and dlt only.
Visitation visitation_metrics(std::span<const Session> sessions);

struct MobilityOptions {
    int tz_offset_minutes = kDefaultTzOffsetMinutes;
    bool dwell_weighted_gyration = true;
    // Treat every AP as its own location for bld/pdt (apc is unaffected).
    bool ap_granularity = false;
};

// All eight daily metrics for one device-day; sessions in time order.
MobilityFeatures daily_mobility(std::span<const Session> sessions, const ingest::BuildingRegistry& registry,
                                const MobilityOptions& opts = {});

struct DailyMobilityRow {
    MacAddress device;
    DayKey day;
    MobilityFeatures features;
};

// Groups sessions by (device, local day of session start).
std::vector<DailyMobilityRow> daily_mobility_table(std::span<const Session> sessions,
                                                   const ingest::BuildingRegistry& registry,
                                                   const MobilityOptions& opts = {});

struct CategoryHistogram {
    BuildingCategory category;
    std::vector<double> pdf;
    std::size_t count = 0;
};

struct SessionStartHistogram {
    std::vector<CategoryHistogram> categories;
    // Categories present in the registry with no sessions; omitted above.
    std::vector<BuildingCategory> empty_categories;
};

SessionStartHistogram session_start_histogram(std::span<const Session> sessions,
                                              const ingest::BuildingRegistry& registry, int tz_offset_minutes,
                                              int bins = 24);

// S(t) per day since first appearance: cumulative distinct buildings.
std::vector<std::size_t> visited_locations_curve(std::span<const Session> device_sessions, int tz_offset_minutes);

struct VisitedCurves {
    std::vector<double> mean;
    std::vector<double> median;
};
// Aggregates per-device curves, each extended by its last value.
VisitedCurves aggregate_visited_curves(const std::vector<std::vector<std::size_t>>& curves);

// Day indices where the day-over-day increment drops sharply relative to the
// preceding window: candidate exploration breaks.
std::vector<std::size_t> detect_slope_changes(std::span<const double> curve, std::size_t window = 3,
                                              double ratio = 0.5);

struct ZipfFit {
    std::vector<double> rank_probability;  // index 0 = rank 1
    std::vector<std::size_t> rank_support; // devices having that rank
    std::optional<double> beta;            // P(L) ~ L^-beta
    std::size_t fitted_ranks = 0;
};

struct ZipfOptions {
    std::size_t min_devices = 5;
    std::size_t max_rank = 50;
};

// `visit_counts` holds one vector of per-location visit counts per device.
// zipf_rank_fit() throws Error{InsufficientRanks} when fewer than 3 ranks qualify.
ZipfFit zipf_rank_table(const std::vector<std::vector<std::uint64_t>>& visit_counts, const ZipfOptions& opts = {});
ZipfFit zipf_rank_fit(const std::vector<std::vector<std::uint64_t>>& visit_counts, const ZipfOptions& opts = {});

// Per-device visit counts per building (or AP) from sessions.
std::vector<std::vector<std::uint64_t>> location_visit_counts(std::span<const Session> sessions, bool by_ap);

struct DurationKernel {
    std::vector<double> edges;  // seconds, size = pdf.size() + 1
    std::vector<double> pdf;    // probability mass per bin
    double five_minute_mass = 0;
    std::size_t count = 0;
};

struct KernelOptions {
    double min_seconds = 1.0;
    double max_seconds = 2.0 * 86400.0;
    int bins_per_decade = 10;
    double idle_timeout_seconds = 300.0;
    double idle_tolerance_seconds = 5.0;
};

// Throws Error{EmptyInput}.
DurationKernel session_duration_kernel(std::span<const Session> sessions, const KernelOptions& opts = {});

struct PassByResult {
    std::map<MacAddress, std::uint64_t> passby_count;
    std::map<MacAddress, std::uint64_t> total_sessions;
    std::map<MacAddress, double> score;
};

// Windows of three consecutive sessions of one device at three distinct APs,
// each shorter than the threshold.
PassByResult detect_passby_aps(const std::vector<std::vector<Session>>& per_device_sessions,
                               double threshold_seconds = 300.0);

struct ReturnOptions {
    bool by_ap = false;
    int horizon_hours = 336;
};

// PDF over hourly lags between visit starts and every later revisit of the
// same location. Empty when there are no revisits.
std::vector<double> return_probability(const std::vector<std::vector<Session>>& per_device_sessions,
                                       const ReturnOptions& opts = {});

struct HourlyCurves {
    std::array<double, 24> flute_fraction{};
    std::array<double, 24> cello_fraction{};
    // index h-1 holds S_h - L_h for stay length h in 1..24.
    std::array<long long, 24> stay_difference{};
};

HourlyCurves hourly_association_curves(std::span<const ApEvent> events,
                                       const std::function<DeviceType(const MacAddress&)>& type_of,
                                       int tz_offset_minutes);

}  // namespace flames::mobility
