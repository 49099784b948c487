#pragma once

// Shared domain types for the trace-fusion pipeline. Everything here is a
// value type; validate() reports invariant violations as data.

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flames {

// Unix epoch milliseconds. NetFlow carries ms fractions, AP logs whole seconds.
using Millis = std::int64_t;
using BuildingId = std::int32_t;

constexpr Millis kMsPerSecond = 1000;
constexpr Millis kMsPerMinute = 60 * kMsPerSecond;
constexpr Millis kMsPerHour = 60 * kMsPerMinute;
constexpr Millis kMsPerDay = 24 * kMsPerHour;

// Campus default, -04:00.
constexpr int kDefaultTzOffsetMinutes = -240;

class Oui {
public:
    constexpr Oui() = default;
    constexpr explicit Oui(std::array<std::uint8_t, 3> octets) : octets_(octets) {}

    static Oui parse(std::string_view text);
    static std::optional<Oui> try_parse(std::string_view text);

    const std::array<std::uint8_t, 3>& octets() const { return octets_; }
    std::string str() const;

    auto operator<=>(const Oui&) const = default;

private:
    std::array<std::uint8_t, 3> octets_{};
};

class MacAddress {
public:
    constexpr MacAddress() = default;
    constexpr explicit MacAddress(std::array<std::uint8_t, 6> octets) : octets_(octets) {}

    // Accepts ':' or '-' separated hex pairs, any case.
    static MacAddress parse(std::string_view text);
    static std::optional<MacAddress> try_parse(std::string_view text);
    static MacAddress from_u64(std::uint64_t value);

    const std::array<std::uint8_t, 6>& octets() const { return octets_; }
    std::uint64_t to_u64() const;
    // Canonical lowercase colon-separated form.
    std::string str() const;
    Oui oui() const { return Oui({octets_[0], octets_[1], octets_[2]}); }

    auto operator<=>(const MacAddress&) const = default;

private:
    std::array<std::uint8_t, 6> octets_{};
};

class Ipv4 {
public:
    constexpr Ipv4() = default;
    constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}

    static Ipv4 parse(std::string_view text);
    static std::optional<Ipv4> try_parse(std::string_view text);

    std::uint32_t value() const { return value_; }
    std::string str() const;

    auto operator<=>(const Ipv4&) const = default;

private:
    std::uint32_t value_ = 0;
};

enum class Protocol : std::uint8_t { Tcp, Udp, Other };
enum class DeviceType : std::uint8_t { Flute, Cello, Unknown };
// Inbound: the device was the flow destination.
enum class Direction : std::uint8_t { Inbound, Outbound };
enum class BuildingCategory : std::uint8_t {
    Academic,
    Social,
    Library,
    Housing,
    Administrative,
    Sports,
    Police,
    Museum,
    Other,
};

std::string_view to_string(Protocol p);
std::string_view to_string(DeviceType t);
std::string_view to_string(Direction d);
std::string_view to_string(BuildingCategory c);
// Case-insensitive; unknown text maps to Other.
Protocol protocol_from_string(std::string_view text);
std::optional<DeviceType> device_type_from_string(std::string_view text);
std::optional<Direction> direction_from_string(std::string_view text);
std::optional<BuildingCategory> building_category_from_string(std::string_view text);

constexpr std::array<BuildingCategory, 9> kAllCategories = {
    BuildingCategory::Academic, BuildingCategory::Social,         BuildingCategory::Library,
    BuildingCategory::Housing,  BuildingCategory::Administrative, BuildingCategory::Sports,
    BuildingCategory::Police,   BuildingCategory::Museum,         BuildingCategory::Other,
};

struct ApEvent {
    Ipv4 user_ip;
    MacAddress user_mac;
    std::string ap_name;
    MacAddress ap_mac;
    Millis lease_begin = 0;
    Millis lease_end = 0;

    bool operator==(const ApEvent&) const = default;
};

struct FlowRecord {
    Millis start = 0;
    Millis finish = 0;
    Millis duration = 0;
    Ipv4 src_ip;
    Ipv4 dst_ip;
    Protocol protocol = Protocol::Tcp;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint64_t packet_count = 0;
    std::uint64_t flow_bytes = 0;

    bool operator==(const FlowRecord&) const = default;
};

struct Lease {
    MacAddress mac;
    Ipv4 ip;
    MacAddress ap_mac;
    std::optional<BuildingId> building_id;
    Millis start = 0;
    Millis end = 0;

    Millis duration() const { return end - start; }
    bool operator==(const Lease&) const = default;
};

struct CoreFlow {
    FlowRecord flow;
    MacAddress device_mac;
    DeviceType device_type = DeviceType::Unknown;
    MacAddress ap_mac;
    std::optional<BuildingId> building_id;
    Direction direction = Direction::Inbound;

    bool operator==(const CoreFlow&) const = default;
};

struct Building {
    BuildingId id = 0;
    std::string name;
    BuildingCategory category = BuildingCategory::Other;
    double lat = 0.0;
    double lon = 0.0;

    bool operator==(const Building&) const = default;
};

// Calendar day in a fixed UTC offset.
class DayKey {
public:
    constexpr DayKey() = default;
    constexpr explicit DayKey(std::int32_t epoch_day) : epoch_day_(epoch_day) {}

    static DayKey from_millis(Millis t, int tz_offset_minutes);
    // "YYYY-MM-DD"
    static DayKey parse(std::string_view text);

    std::int32_t epoch_day() const { return epoch_day_; }
    std::chrono::year_month_day date() const;
    bool is_weekend() const;
    std::string str() const;
    // Local midnight of this day as epoch ms.
    Millis local_midnight(int tz_offset_minutes) const;

    auto operator<=>(const DayKey&) const = default;

private:
    std::int32_t epoch_day_ = 0;
};

// Local hour of day [0, 24) for a timestamp.
int local_hour(Millis t, int tz_offset_minutes);

struct MobilityFeatures {
    double ljm = 0;  // meters
    double dia = 0;  // meters
    double tjm = 0;  // meters
    double gyr = 0;  // meters
    double bld = 0;
    double apc = 0;
    double pdt = 0;  // minutes
    double dlt = 0;  // minutes

    static constexpr std::array<std::string_view, 8> kNames = {"ljm", "dia", "tjm", "gyr",
                                                               "bld", "apc", "pdt", "dlt"};
    std::array<double, 8> values() const { return {ljm, dia, tjm, gyr, bld, apc, pdt, dlt}; }
    static MobilityFeatures from_values(const std::array<double, 8>& v);
    bool operator==(const MobilityFeatures&) const = default;
};

struct TrafficFeatures {
    double tby = 0;  // bytes
    double aby = 0;  // bytes
    double sby = 0;  // bytes
    double tat = 0;  // minutes
    double aat = 0;  // minutes
    double tfc = 0;
    double sfc = 0;
    double rub = 0;
    double ruf = 0;
    double ait = 0;  // seconds
    double sit = 0;  // seconds

    static constexpr std::array<std::string_view, 11> kNames = {
        "tby", "aby", "sby", "tat", "aat", "tfc", "sfc", "rub", "ruf", "ait", "sit"};
    std::array<double, 11> values() const {
        return {tby, aby, sby, tat, aat, tfc, sfc, rub, ruf, ait, sit};
    }
    static TrafficFeatures from_values(const std::array<double, 11>& v);
    bool operator==(const TrafficFeatures&) const = default;
};

using Violations = std::vector<std::string>;

Violations validate(const ApEvent& e);
Violations validate(const FlowRecord& f);
Violations validate(const Lease& l);
Violations validate(const Building& b);
Violations validate(const MobilityFeatures& m);
Violations validate(const TrafficFeatures& t);
// Checks the containment invariant against the lease the flow was matched to.
Violations validate(const CoreFlow& c, const Lease& lease);

}  // namespace flames

template <>
struct std::hash<flames::MacAddress> {
    std::size_t operator()(const flames::MacAddress& m) const noexcept {
        return std::hash<std::uint64_t>{}(m.to_u64());
    }
};

template <>
struct std::hash<flames::Ipv4> {
    std::size_t operator()(const flames::Ipv4& ip) const noexcept {
        return std::hash<std::uint32_t>{}(ip.value());
    }
};

template <>
struct std::hash<flames::Oui> {
    std::size_t operator()(const flames::Oui& o) const noexcept {
        const auto& b = o.octets();
        return std::hash<std::uint32_t>{}((b[0] << 16) | (b[1] << 8) | b[2]);
    }
};
