#pragma once

// Lease derivation from consecutive associations, and attribution of flows
// to devices by lease containment (the CORE dataset).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flames/core.hpp"
#include "flames/ingest.hpp"

namespace flames::fuse {

struct LeaseOptions {
    // Consecutive associations further apart than this are treated as the
    // device leaving the network; the interval is dropped like the final
    // association. Zero disables the cap.
    Millis max_gap = 0;
};

struct LeaseDerivation {
    std::vector<Lease> leases;
    std::uint64_t dropped_zero_length = 0;
    std::uint64_t dropped_gap = 0;
    std::uint64_t discarded_last = 0;
};

using BuildingResolver = std::function<std::optional<BuildingId>(const std::string& ap_name)>;

// Events of one device ordered by lease_begin. Lease k spans
// [event_k.begin, event_{k+1}.begin) with event_k's IP and AP; the final
// association has no successor and is discarded. Throws Error{UnsortedInput}.
LeaseDerivation derive_leases(std::span<const ApEvent> events, const BuildingResolver& resolve = {},
                              const LeaseOptions& opts = {});

// Groups events by device, sorts each stream and derives leases for all of
// them. Output is ordered by (mac, start).
LeaseDerivation derive_all_leases(std::vector<ApEvent> events, const BuildingResolver& resolve = {},
                                  const LeaseOptions& opts = {});

// Per-IP sorted lease arrays answering containment queries.
class LeaseIndex {
public:
    explicit LeaseIndex(std::vector<Lease> leases);

    // Lease on `ip` with start <= from and to <= end, if any. When leases on
    // one IP overlap, the one with the latest start wins.
    const Lease* find_containing(Ipv4 ip, Millis from, Millis to) const;
    const std::vector<Lease>& leases() const { return leases_; }

private:
    struct Slot {
        std::vector<std::uint32_t> order;   // lease indices sorted by start
        std::vector<Millis> running_max_end;
    };
    std::vector<Lease> leases_;
    std::unordered_map<Ipv4, Slot> by_ip_;
};

struct MatchStats {
    std::uint64_t total = 0;
    // Flows with at least one attribution.
    std::uint64_t matched = 0;
    std::uint64_t unmatched = 0;
    // Flows whose src and dst both matched a lease (emitted twice).
    std::uint64_t two_sided = 0;
    std::uint64_t core_records = 0;

    void merge(const MatchStats& o);
};

using DeviceTypeLookup = std::function<DeviceType(const MacAddress&)>;

// Streaming matcher over a read-only index.
class FlowMatcher {
public:
    FlowMatcher(const LeaseIndex& index, DeviceTypeLookup type_of = {})
        : index_(index), type_of_(std::move(type_of)) {}

    // Appends 0, 1 or 2 CoreFlows to `out`.
    void match(const FlowRecord& flow, std::vector<CoreFlow>& out);
    const MatchStats& stats() const { return stats_; }

private:
    const LeaseIndex& index_;
    DeviceTypeLookup type_of_;
    MatchStats stats_;
};

std::vector<CoreFlow> match_flows(std::span<const FlowRecord> flows, const LeaseIndex& index,
                                  MatchStats* stats = nullptr, const DeviceTypeLookup& type_of = {});

struct DeviceDay {
    MacAddress device;
    DayKey day;
    auto operator<=>(const DeviceDay&) const = default;
};

// A flow belongs to the local day of its start timestamp.
std::map<DeviceDay, std::vector<CoreFlow>> partition_days(std::span<const CoreFlow> core, int tz_offset_minutes);

// Canonical order used for CORE output: (device, start, finish, remaining columns).
void sort_core(std::vector<CoreFlow>& core);

// CORE file: device_mac, device_type, ap_mac, building_id, direction, then
// the ten NetFlow columns.
std::string format_core_line(const CoreFlow& c, char delim = ',');
CoreFlow parse_core_line(std::string_view line, char delim = ',');
void write_core(std::ostream& out, std::span<const CoreFlow> core);
std::vector<CoreFlow> read_core(const std::filesystem::path& path, ingest::ParseStats* stats = nullptr);

// Sessions file: mac, ip, ap_mac, building_id, start, end (seconds).
void write_leases(std::ostream& out, std::span<const Lease> leases);
std::vector<Lease> read_leases(const std::filesystem::path& path);

}  // namespace flames::fuse
