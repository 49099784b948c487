#include "flames/fuse.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <tuple>

#include "flames/io.hpp"
#include "flames/text.hpp"

namespace flames::fuse {

LeaseDerivation derive_leases(std::span<const ApEvent> events, const BuildingResolver& resolve,
                              const LeaseOptions& opts) {
    LeaseDerivation out;
    if (events.empty()) return out;
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].lease_begin < events[i - 1].lease_begin)
            throw Error(Errc::UnsortedInput,
                        fmt::format("association {} precedes its predecessor", i));
        if (events[i].user_mac != events[0].user_mac)
            throw Error(Errc::UnsortedInput, "events from more than one device");
    }
    out.leases.reserve(events.size() - 1);
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
        const auto& cur = events[i];
        const Millis end = events[i + 1].lease_begin;
        if (end == cur.lease_begin) {
            ++out.dropped_zero_length;
            continue;
        }
        if (opts.max_gap > 0 && end - cur.lease_begin > opts.max_gap) {
            ++out.dropped_gap;
            continue;
        }
        Lease l;
        l.mac = cur.user_mac;
        l.ip = cur.user_ip;
        l.ap_mac = cur.ap_mac;
        if (resolve) l.building_id = resolve(cur.ap_name);
        l.start = cur.lease_begin;
        l.end = end;
        out.leases.push_back(l);
    }
    out.discarded_last = 1;
    return out;
}

LeaseDerivation derive_all_leases(std::vector<ApEvent> events, const BuildingResolver& resolve,
                                  const LeaseOptions& opts) {
    auto key = [](const ApEvent& e) {
        return std::tie(e.user_mac, e.lease_begin, e.ap_mac, e.user_ip, e.ap_name, e.lease_end);
    };
    std::sort(events.begin(), events.end(), [&](const ApEvent& a, const ApEvent& b) { return key(a) < key(b); });
    LeaseDerivation out;
    std::size_t begin = 0;
    while (begin < events.size()) {
        std::size_t end = begin + 1;
        while (end < events.size() && events[end].user_mac == events[begin].user_mac) ++end;
        auto part = derive_leases(std::span<const ApEvent>(events).subspan(begin, end - begin), resolve, opts);
        out.leases.insert(out.leases.end(), part.leases.begin(), part.leases.end());
        out.dropped_zero_length += part.dropped_zero_length;
        out.dropped_gap += part.dropped_gap;
        out.discarded_last += part.discarded_last;
        begin = end;
    }
    return out;
}

LeaseIndex::LeaseIndex(std::vector<Lease> leases) : leases_(std::move(leases)) {
    for (std::uint32_t i = 0; i < leases_.size(); ++i) by_ip_[leases_[i].ip].order.push_back(i);
    for (auto& [ip, slot] : by_ip_) {
        std::sort(slot.order.begin(), slot.order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return std::tie(leases_[a].start, leases_[a].end, a) < std::tie(leases_[b].start, leases_[b].end, b);
        });
        slot.running_max_end.resize(slot.order.size());
        Millis best = std::numeric_limits<Millis>::min();
        for (std::size_t k = 0; k < slot.order.size(); ++k) {
            best = std::max(best, leases_[slot.order[k]].end);
            slot.running_max_end[k] = best;
        }
    }
}

const Lease* LeaseIndex::find_containing(Ipv4 ip, Millis from, Millis to) const {
    auto it = by_ip_.find(ip);
    if (it == by_ip_.end()) return nullptr;
    const auto& slot = it->second;
    // Last lease whose start <= from.
    auto pos = std::upper_bound(slot.order.begin(), slot.order.end(), from,
                                [&](Millis t, std::uint32_t idx) { return t < leases_[idx].start; });
    auto k = static_cast<std::ptrdiff_t>(pos - slot.order.begin()) - 1;
    for (; k >= 0; --k) {
        if (slot.running_max_end[static_cast<std::size_t>(k)] < to) break;
        const auto& l = leases_[slot.order[static_cast<std::size_t>(k)]];
        if (to <= l.end) return &l;
    }
    return nullptr;
}

void MatchStats::merge(const MatchStats& o) {
    total += o.total;
    matched += o.matched;
    unmatched += o.unmatched;
    two_sided += o.two_sided;
    core_records += o.core_records;
}

void FlowMatcher::match(const FlowRecord& flow, std::vector<CoreFlow>& out) {
    ++stats_.total;
    int hits = 0;
    auto emit = [&](const Lease& lease, Direction dir) {
        CoreFlow c;
        c.flow = flow;
        c.device_mac = lease.mac;
        c.device_type = type_of_ ? type_of_(lease.mac) : DeviceType::Unknown;
        c.ap_mac = lease.ap_mac;
        c.building_id = lease.building_id;
        c.direction = dir;
        out.push_back(c);
        ++hits;
    };
    if (const Lease* l = index_.find_containing(flow.src_ip, flow.start, flow.finish)) emit(*l, Direction::Outbound);
    if (const Lease* l = index_.find_containing(flow.dst_ip, flow.start, flow.finish)) emit(*l, Direction::Inbound);
    if (hits == 0) {
        ++stats_.unmatched;
    } else {
        ++stats_.matched;
        if (hits == 2) ++stats_.two_sided;
        stats_.core_records += static_cast<std::uint64_t>(hits);
    }
}

std::vector<CoreFlow> match_flows(std::span<const FlowRecord> flows, const LeaseIndex& index, MatchStats* stats,
                                  const DeviceTypeLookup& type_of) {
    FlowMatcher matcher(index, type_of);
    std::vector<CoreFlow> out;
    out.reserve(flows.size());
    for (const auto& f : flows) matcher.match(f, out);
    if (stats) stats->merge(matcher.stats());
    return out;
}

std::map<DeviceDay, std::vector<CoreFlow>> partition_days(std::span<const CoreFlow> core, int tz_offset_minutes) {
    std::map<DeviceDay, std::vector<CoreFlow>> out;
    for (const auto& c : core)
        out[{c.device_mac, DayKey::from_millis(c.flow.start, tz_offset_minutes)}].push_back(c);
    return out;
}

namespace {

auto core_key(const CoreFlow& c) {
    const auto& f = c.flow;
    return std::make_tuple(c.device_mac, f.start, f.finish, f.src_ip, f.dst_ip, f.src_port, f.dst_port,
                           f.protocol, f.packet_count, f.flow_bytes, c.direction, c.ap_mac);
}

}  // namespace

void sort_core(std::vector<CoreFlow>& core) {
    std::sort(core.begin(), core.end(), [](const CoreFlow& a, const CoreFlow& b) { return core_key(a) < core_key(b); });
}

std::string format_core_line(const CoreFlow& c, char d) {
    return fmt::format("{}{}{}{}{}{}{}{}{}{}{}", c.device_mac.str(), d, to_string(c.device_type), d, c.ap_mac.str(), d,
                       c.building_id ? std::to_string(*c.building_id) : std::string(), d, to_string(c.direction), d,
                       ingest::format_netflow_line(c.flow, d));
}

CoreFlow parse_core_line(std::string_view line, char d) {
    // The first five columns are ours; the rest is a NetFlow row.
    std::size_t pos = 0;
    std::array<std::string_view, 5> head;
    for (std::size_t i = 0; i < head.size(); ++i) {
        auto next = line.find(d, pos);
        if (next == std::string_view::npos) throw Error(Errc::MalformedLine, "CORE row has too few fields");
        head[i] = text::trim(line.substr(pos, next - pos));
        pos = next + 1;
    }
    CoreFlow c;
    auto mac = MacAddress::try_parse(head[0]);
    if (!mac) throw Error(Errc::FieldParse, "bad device_mac", 0);
    auto type = device_type_from_string(head[1]);
    if (!type) throw Error(Errc::FieldParse, "bad device_type", 1);
    auto ap = MacAddress::try_parse(head[2]);
    if (!ap) throw Error(Errc::FieldParse, "bad ap_mac", 2);
    if (!head[3].empty()) {
        auto b = text::parse_int(head[3]);
        if (!b) throw Error(Errc::FieldParse, "bad building_id", 3);
        c.building_id = static_cast<BuildingId>(*b);
    }
    auto dir = direction_from_string(head[4]);
    if (!dir) throw Error(Errc::FieldParse, "bad direction", 4);
    c.device_mac = *mac;
    c.device_type = *type;
    c.ap_mac = *ap;
    c.direction = *dir;
    c.flow = ingest::parse_netflow_line(line.substr(pos), d);
    return c;
}

void write_core(std::ostream& out, std::span<const CoreFlow> core) {
    out << text::kFormatTag << '\n';
    for (const auto& c : core) out << format_core_line(c) << '\n';
}

std::vector<CoreFlow> read_core(const std::filesystem::path& path, ingest::ParseStats* stats) {
    auto in = io::open_input(path);
    ingest::RecordReader<CoreFlow> reader(in, ',', &parse_core_line);
    std::vector<CoreFlow> out;
    CoreFlow c;
    while (reader.next(c)) out.push_back(c);
    if (stats) stats->merge(reader.stats());
    return out;
}

void write_leases(std::ostream& out, std::span<const Lease> leases) {
    out << text::kFormatTag << '\n';
    for (const auto& l : leases)
        out << fmt::format("{},{},{},{},{},{}\n", l.mac.str(), l.ip.str(), l.ap_mac.str(),
                           l.building_id ? std::to_string(*l.building_id) : std::string(),
                           text::format_seconds_ms(l.start), text::format_seconds_ms(l.end));
}

namespace {

Lease parse_lease_line(std::string_view line, char d) {
    auto f = text::split(line, d);
    if (f.size() != 6) throw Error(Errc::MalformedLine, "session rows have 6 fields");
    Lease l;
    auto mac = MacAddress::try_parse(f[0]);
    auto ip = Ipv4::try_parse(f[1]);
    auto ap = MacAddress::try_parse(f[2]);
    auto start = text::parse_seconds_ms(f[4]);
    auto end = text::parse_seconds_ms(f[5]);
    if (!mac || !ip || !ap || !start || !end) throw Error(Errc::FieldParse, "bad session row");
    if (!f[3].empty()) {
        auto b = text::parse_int(f[3]);
        if (!b) throw Error(Errc::FieldParse, "bad building_id", 3);
        l.building_id = static_cast<BuildingId>(*b);
    }
    l.mac = *mac;
    l.ip = *ip;
    l.ap_mac = *ap;
    l.start = *start;
    l.end = *end;
    return l;
}

}  // namespace

std::vector<Lease> read_leases(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    ingest::RecordReader<Lease> reader(in, ',', &parse_lease_line);
    std::vector<Lease> out;
    Lease l;
    while (reader.next(l)) out.push_back(l);
    return out;
}

}  // namespace flames::fuse
