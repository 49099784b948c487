#pragma once

// Seeded generators: raw AP-log and NetFlow traces with planted per-type
// behaviour, and feature rows sampled from trained mixture models.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "flames/config.hpp"
#include "flames/core.hpp"
#include "flames/features.hpp"
#include "flames/ingest.hpp"
#include "flames/learn.hpp"

namespace flames::synth {

struct DayClassParams {
    double active_prob = 0.9;       // chance a device shows up on a given day
    double buildings_mean = 3.0;    // distinct buildings per active day, >= 1
    double buildings_shape = 1.0;   // negative-binomial shape of (buildings - 1); 1 is geometric
    double start_hour_mean = 9.0;   // local hour of first association
    double start_hour_sd = 1.5;
    double presence_median_min = 235;  // lognormal total presence
    double presence_sigma = 0.77;
    double preferred_share = 0.6;   // mean dwell share of the preferred building when >1 building
    double active_periods_mean = 6; // Poisson mean of traffic periods per day (plus one)
    double period_median_s = 120;   // lognormal traffic period length
    double period_sigma = 1.0;
};

struct TypeParams {
    std::size_t devices = 0;
    // Pooled per-flow byte and packet laws (lognormal).
    double size_median = 678;
    double size_sigma = 1.494;
    double packets_median = 4;
    double packets_sigma = 1.0;
    // Within-period gaps between flow starts: scale * Beta(alpha, beta) seconds.
    double iat_alpha = 0.6;
    double iat_beta = 3.0;
    double iat_scale_s = 60;
    double flow_runtime_median_s = 1.5;
    double flow_runtime_sigma = 1.2;
    // Day-level coupling: log activity gets +count_coupling*z and log size
    // gets -size_coupling*z, z ~ N(0,1) per device-day. The pooled flow-size
    // median stays size_median.
    double count_coupling = 0;
    double size_coupling = 0;
    double device_activity_sigma = 0.7;  // lognormal per-device activity level
    // Traffic activity scales with buildings^-mobility_coupling, normalized to mean one.
    double mobility_coupling = 0.8;
    double zipf_exponent = 1.16;
    double aps_per_visit_mean = 1.2;  // extra APs per building visit (Poisson)
    // Session length mixture inside a visit.
    double idle_session_mass = 0.2;   // exactly the 300 s idle timeout
    double class_session_mass = 0.1;  // 1 h or 2 h blocks
    double session_median_s = 1200;
    double session_sigma = 1.0;
    double passby_prob = 0;           // short hops through another building between visits
    double udp_device_prob = 0.3;     // share of devices that use UDP at all
    double udp_share_mean = 0.25;     // mean UDP flow share of such devices
    double udp_size_factor = 0.7;
    double admob_prob = 0;            // per active day
    DayClassParams weekday;
    DayClassParams weekend;
};

struct OuiPlan {
    std::size_t survey = 4;      // OUIs labeled by survey, per type
    std::size_t registry = 3;    // labeled by registry, per type
    std::size_t unlabeled = 2;   // absent from the label file, per type
    std::size_t both = 2;        // labeled "both", shared by the two types
    double unlabeled_share = 0.12;
    double both_share = 0.1;
};

struct PopulationSpec {
    std::uint64_t seed = 20120402;
    std::string start_date = "2012-04-02";
    int days = 14;
    int tz_offset_minutes = kDefaultTzOffsetMinutes;
    int buildings = 40;
    double campus_radius_m = 1400;
    double center_lat = 40.4237;
    double center_lon = -86.9212;
    int aps_min = 2;
    int aps_max = 8;
    std::size_t servers = 1500;
    OuiPlan ouis;
    TypeParams flute;
    TypeParams cello;

    // Defaults with the published per-type values (200 devices, 14 days).
    static PopulationSpec defaults();
    // Defaults overridden by [population], [flute], [cello], [flute.weekday],
    // ... keys. Unknown keys throw Error{SpecInvalid}.
    static PopulationSpec from_config(const config::Config& cfg);
    // Throws Error{SpecInvalid}.
    void validate() const;
    const TypeParams& params(DeviceType t) const { return t == DeviceType::Cello ? cello : flute; }
};

struct DeviceTruth {
    MacAddress mac;
    Ipv4 ip;
    DeviceType type = DeviceType::Unknown;
    Oui oui;
    std::string oui_group;  // survey, registry, both, unlabeled
    std::uint64_t active_days = 0;
    std::uint64_t flows = 0;
};

struct Traces {
    std::vector<ApEvent> ap_events;  // sorted by (lease_begin, mac)
    std::vector<FlowRecord> flows;   // sorted by (start, src, dst, ...)
    ingest::BuildingRegistry registry;
    ingest::OuiLabelTable labels;
    ingest::DnsMap dns;
    std::vector<DeviceTruth> devices;
    // Planted values that the pipeline should recover, by name.
    std::map<std::string, double> expected;
    std::uint64_t boundary_crossing_flows = 0;  // always 0: flows are clipped to leases
};

// Deterministic in spec (including seed). Throws Error{SpecInvalid}.
Traces generate_traces(const PopulationSpec& spec);

inline constexpr const char* kTruthFormatTag = "flames-truth-v1";

void write_manifest(std::ostream& out, const PopulationSpec& spec, const Traces& t);

struct TraceFiles {
    std::filesystem::path aplog, netflow, buildings, ouis, dns, truth;
};

TraceFiles write_traces(const std::filesystem::path& dir, const PopulationSpec& spec, const Traces& t);

// Samples `n` rows per type from per-type models. Every model must carry the
// full combined feature list; otherwise Error{ModelFeatureMismatch}. Synthetic
// rows carry a zero device and day.
std::vector<features::FeatureRow> synthesize_features(const std::map<DeviceType, learn::GmmModel>& models,
                                                      std::size_t n_per_type, std::uint64_t seed);

// SplitMix64 step, used to derive independent per-device seeds.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace flames::synth
