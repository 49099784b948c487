#include "flames/core.hpp"

#include <fmt/format.h>

#include <cmath>

#include "flames/error.hpp"
#include "flames/text.hpp"

namespace flames {

std::string_view errc_name(Errc code) {
    switch (code) {
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::FieldParse: return "FieldParse";
        case Errc::DuplicateBuilding: return "DuplicateBuilding";
        case Errc::DanglingRule: return "DanglingRule";
        case Errc::DuplicateOui: return "DuplicateOui";
        case Errc::UnsortedInput: return "UnsortedInput";
        case Errc::EmptyGroup: return "EmptyGroup";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::InsufficientRanks: return "InsufficientRanks";
        case Errc::SupportViolation: return "SupportViolation";
        case Errc::NonConvergence: return "NonConvergence";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::SingleClassInput: return "SingleClassInput";
        case Errc::KExceedsN: return "KExceedsN";
        case Errc::DegenerateComponent: return "DegenerateComponent";
        case Errc::ModelFeatureMismatch: return "ModelFeatureMismatch";
        case Errc::SpecInvalid: return "SpecInvalid";
        case Errc::BadFormat: return "BadFormat";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> parse_hex_octets(std::string_view text) {
    text = text::trim(text);
    if (text.size() != N * 3 - 1) return std::nullopt;
    std::array<std::uint8_t, N> out{};
    const char sep = N > 1 ? text[2] : ':';
    if (sep != ':' && sep != '-') return std::nullopt;
    for (std::size_t i = 0; i < N; ++i) {
        const auto base = i * 3;
        int hi = hex_digit(text[base]);
        int lo = hex_digit(text[base + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        if (i + 1 < N && text[base + 2] != sep) return std::nullopt;
        out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return out;
}

template <std::size_t N>
std::string format_hex_octets(const std::array<std::uint8_t, N>& octets) {
    std::string out;
    out.reserve(N * 3);
    for (std::size_t i = 0; i < N; ++i) {
        if (i) out.push_back(':');
        out += fmt::format("{:02x}", octets[i]);
    }
    return out;
}

}  // namespace

std::optional<Oui> Oui::try_parse(std::string_view text) {
    auto octets = parse_hex_octets<3>(text);
    if (!octets) return std::nullopt;
    return Oui(*octets);
}

Oui Oui::parse(std::string_view text) {
    auto oui = try_parse(text);
    if (!oui) throw Error(Errc::FieldParse, fmt::format("invalid OUI '{}'", text));
    return *oui;
}

std::string Oui::str() const { return format_hex_octets(octets_); }

std::optional<MacAddress> MacAddress::try_parse(std::string_view text) {
    auto octets = parse_hex_octets<6>(text);
    if (!octets) return std::nullopt;
    return MacAddress(*octets);
}

MacAddress MacAddress::parse(std::string_view text) {
    auto mac = try_parse(text);
    if (!mac) throw Error(Errc::FieldParse, fmt::format("invalid MAC address '{}'", text));
    return *mac;
}

MacAddress MacAddress::from_u64(std::uint64_t value) {
    std::array<std::uint8_t, 6> o{};
    for (int i = 5; i >= 0; --i) {
        o[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(value & 0xff);
        value >>= 8;
    }
    return MacAddress(o);
}

std::uint64_t MacAddress::to_u64() const {
    std::uint64_t v = 0;
    for (auto b : octets_) v = (v << 8) | b;
    return v;
}

std::string MacAddress::str() const { return format_hex_octets(octets_); }

std::optional<Ipv4> Ipv4::try_parse(std::string_view text) {
    text = text::trim(text);
    std::uint32_t value = 0;
    int parts = 0;
    std::size_t pos = 0;
    while (parts < 4) {
        auto dot = text.find('.', pos);
        auto piece = text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
        if (piece.empty() || piece.size() > 3) return std::nullopt;
        auto v = text::parse_uint(piece);
        if (!v || *v > 255) return std::nullopt;
        value = (value << 8) | static_cast<std::uint32_t>(*v);
        ++parts;
        if (dot == std::string_view::npos) break;
        pos = dot + 1;
    }
    if (parts != 4 || text.find('.', pos) != std::string_view::npos) return std::nullopt;
    return Ipv4(value);
}

Ipv4 Ipv4::parse(std::string_view text) {
    auto ip = try_parse(text);
    if (!ip) throw Error(Errc::FieldParse, fmt::format("invalid IPv4 address '{}'", text));
    return *ip;
}

std::string Ipv4::str() const {
    return fmt::format("{}.{}.{}.{}", value_ >> 24, (value_ >> 16) & 0xff, (value_ >> 8) & 0xff,
                       value_ & 0xff);
}

std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::Tcp: return "TCP";
        case Protocol::Udp: return "UDP";
        case Protocol::Other: return "OTHER";
    }
    return "OTHER";
}

std::string_view to_string(DeviceType t) {
    switch (t) {
        case DeviceType::Flute: return "flute";
        case DeviceType::Cello: return "cello";
        case DeviceType::Unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Direction d) { return d == Direction::Inbound ? "in" : "out"; }

std::string_view to_string(BuildingCategory c) {
    switch (c) {
        case BuildingCategory::Academic: return "academic";
        case BuildingCategory::Social: return "social";
        case BuildingCategory::Library: return "library";
        case BuildingCategory::Housing: return "housing";
        case BuildingCategory::Administrative: return "administrative";
        case BuildingCategory::Sports: return "sports";
        case BuildingCategory::Police: return "police";
        case BuildingCategory::Museum: return "museum";
        case BuildingCategory::Other: return "other";
    }
    return "other";
}

Protocol protocol_from_string(std::string_view text) {
    if (text::iequals(text, "tcp")) return Protocol::Tcp;
    if (text::iequals(text, "udp")) return Protocol::Udp;
    return Protocol::Other;
}

std::optional<DeviceType> device_type_from_string(std::string_view text) {
    for (auto t : {DeviceType::Flute, DeviceType::Cello, DeviceType::Unknown})
        if (text::iequals(text, to_string(t))) return t;
    return std::nullopt;
}

std::optional<Direction> direction_from_string(std::string_view text) {
    if (text::iequals(text, "in")) return Direction::Inbound;
    if (text::iequals(text, "out")) return Direction::Outbound;
    return std::nullopt;
}

std::optional<BuildingCategory> building_category_from_string(std::string_view text) {
    for (auto c : kAllCategories)
        if (text::iequals(text, to_string(c))) return c;
    return std::nullopt;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

DayKey DayKey::from_millis(Millis t, int tz_offset_minutes) {
    const Millis local = t + static_cast<Millis>(tz_offset_minutes) * kMsPerMinute;
    return DayKey(static_cast<std::int32_t>(floor_div(local, kMsPerDay)));
}

DayKey DayKey::parse(std::string_view text) {
    auto parts = text::split(text, '-');
    if (parts.size() != 3) throw Error(Errc::FieldParse, fmt::format("invalid date '{}'", text));
    auto y = text::parse_int(parts[0]);
    auto m = text::parse_int(parts[1]);
    auto d = text::parse_int(parts[2]);
    if (!y || !m || !d) throw Error(Errc::FieldParse, fmt::format("invalid date '{}'", text));
    std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(*y)),
                                    std::chrono::month(static_cast<unsigned>(*m)),
                                    std::chrono::day(static_cast<unsigned>(*d))};
    if (!ymd.ok()) throw Error(Errc::FieldParse, fmt::format("invalid date '{}'", text));
    return DayKey(std::chrono::sys_days(ymd).time_since_epoch().count());
}

std::chrono::year_month_day DayKey::date() const {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{epoch_day_}}};
}

bool DayKey::is_weekend() const {
    std::chrono::weekday wd{std::chrono::sys_days{std::chrono::days{epoch_day_}}};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

std::string DayKey::str() const {
    auto ymd = date();
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

Millis DayKey::local_midnight(int tz_offset_minutes) const {
    return static_cast<Millis>(epoch_day_) * kMsPerDay -
           static_cast<Millis>(tz_offset_minutes) * kMsPerMinute;
}

int local_hour(Millis t, int tz_offset_minutes) {
    const Millis local = t + static_cast<Millis>(tz_offset_minutes) * kMsPerMinute;
    const Millis in_day = local - floor_div(local, kMsPerDay) * kMsPerDay;
    return static_cast<int>(in_day / kMsPerHour);
}

MobilityFeatures MobilityFeatures::from_values(const std::array<double, 8>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

TrafficFeatures TrafficFeatures::from_values(const std::array<double, 11>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
}

Violations validate(const ApEvent& e) {
    Violations v;
    if (e.lease_begin > e.lease_end) v.emplace_back("lease_begin <= lease_end");
    return v;
}

Violations validate(const FlowRecord& f) {
    Violations v;
    if (f.finish < f.start) v.emplace_back("finish >= start");
    if (std::llabs(f.duration - (f.finish - f.start)) > 1) v.emplace_back("|duration - (finish - start)| <= 0.001");
    if (f.flow_bytes > 0 && f.packet_count < 1) v.emplace_back("packet_count >= 1 when flow_bytes > 0");
    return v;
}

Violations validate(const Lease& l) {
    Violations v;
    if (!(l.start < l.end)) v.emplace_back("start < end");
    return v;
}

Violations validate(const Building& b) {
    Violations v;
    if (!(std::abs(b.lat) <= 90.0)) v.emplace_back("|lat| <= 90");
    if (!(std::abs(b.lon) <= 180.0)) v.emplace_back("|lon| <= 180");
    return v;
}

Violations validate(const MobilityFeatures& m) {
    Violations v;
    for (std::size_t i = 0; i < m.values().size(); ++i)
        if (!(m.values()[i] >= 0)) v.push_back(fmt::format("{} >= 0", MobilityFeatures::kNames[i]));
    if (m.dia < m.ljm) v.emplace_back("dia >= ljm");
    if (m.tjm < m.ljm) v.emplace_back("tjm >= ljm");
    return v;
}

Violations validate(const TrafficFeatures& t) {
    Violations v;
    for (std::size_t i = 0; i < t.values().size(); ++i)
        if (!(t.values()[i] >= 0)) v.push_back(fmt::format("{} >= 0", TrafficFeatures::kNames[i]));
    if (t.rub > 1) v.emplace_back("rub <= 1");
    if (t.ruf > 1) v.emplace_back("ruf <= 1");
    if (t.tfc >= 1 && !(t.tby > 0)) v.emplace_back("tfc >= 1 implies tby > 0");
    return v;
}

Violations validate(const CoreFlow& c, const Lease& lease) {
    Violations v = validate(c.flow);
    if (c.flow.start < lease.start) v.emplace_back("flow.start >= lease.start");
    if (c.flow.finish > lease.end) v.emplace_back("flow.finish <= lease.end");
    return v;
}

}  // namespace flames
