#include "flames/ingest.hpp"

#include <fmt/format.h>

#include <cctype>

#include "flames/io.hpp"
#include "flames/text.hpp"

namespace flames::ingest {

namespace {

[[noreturn]] void field_error(int column, std::string_view name, std::string_view value) {
    throw Error(Errc::FieldParse, fmt::format("column {} ({}): cannot parse '{}'", column, name, value),
                column);
}

Millis seconds_field(std::string_view v, int column, std::string_view name) {
    auto ms = text::parse_seconds_ms(v);
    if (!ms) field_error(column, name, v);
    return *ms;
}

Ipv4 ip_field(std::string_view v, int column, std::string_view name) {
    auto ip = Ipv4::try_parse(v);
    if (!ip) field_error(column, name, v);
    return *ip;
}

MacAddress mac_field(std::string_view v, int column, std::string_view name) {
    auto mac = MacAddress::try_parse(v);
    if (!mac) field_error(column, name, v);
    return *mac;
}

std::uint16_t port_field(std::string_view v, int column, std::string_view name) {
    auto p = text::parse_uint(v);
    if (!p || *p > 65535) field_error(column, name, v);
    return static_cast<std::uint16_t>(*p);
}

std::uint64_t count_field(std::string_view v, int column, std::string_view name) {
    auto c = text::parse_uint(v);
    if (!c) field_error(column, name, v);
    return *c;
}

thread_local std::vector<std::string_view> t_fields;

}  // namespace

void ParseStats::merge(const ParseStats& other) {
    lines += other.lines;
    records += other.records;
    skipped += other.skipped;
    ignored += other.ignored;
    malformed += other.malformed;
    field_errors += other.field_errors;
    for (const auto& e : other.sample_errors)
        if (sample_errors.size() < 8) sample_errors.push_back(e);
}

bool is_ignorable_line(std::string_view line, bool first_line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#' || t == text::kFormatTag) return true;
    return first_line && std::isalpha(static_cast<unsigned char>(t.front()));
}

FlowRecord parse_netflow_line(std::string_view line, char delim) {
    auto& f = t_fields;
    text::split(line, delim, f);
    if (f.size() != kNetflowFields)
        throw Error(Errc::MalformedLine,
                    fmt::format("expected {} fields, found {}", kNetflowFields, f.size()));
    FlowRecord r;
    r.start = seconds_field(f[0], 0, "start");
    r.finish = seconds_field(f[1], 1, "finish");
    r.duration = seconds_field(f[2], 2, "duration");
    r.src_ip = ip_field(f[3], 3, "src_ip");
    r.dst_ip = ip_field(f[4], 4, "dst_ip");
    if (f[5].empty()) field_error(5, "protocol", f[5]);
    r.protocol = protocol_from_string(f[5]);
    r.src_port = port_field(f[6], 6, "src_port");
    r.dst_port = port_field(f[7], 7, "dst_port");
    r.packet_count = count_field(f[8], 8, "packet_count");
    r.flow_bytes = count_field(f[9], 9, "flow_bytes");
    if (r.finish < r.start) field_error(1, "finish", fmt::format("{} precedes start", f[1]));
    if (std::llabs(r.duration - (r.finish - r.start)) > 1)
        field_error(2, "duration", fmt::format("{} disagrees with finish - start", f[2]));
    if (r.flow_bytes > 0 && r.packet_count == 0)
        field_error(8, "packet_count", "0 packets with non-zero bytes");
    return r;
}

ApEvent parse_ap_event_line(std::string_view line, char delim) {
    auto& f = t_fields;
    text::split(line, delim, f);
    if (f.size() != kApEventFields)
        throw Error(Errc::MalformedLine,
                    fmt::format("expected {} fields, found {}", kApEventFields, f.size()));
    ApEvent e;
    e.user_ip = ip_field(f[0], 0, "user_ip");
    e.user_mac = mac_field(f[1], 1, "user_mac");
    if (f[2].empty()) field_error(2, "ap_name", f[2]);
    e.ap_name = std::string(f[2]);
    e.ap_mac = mac_field(f[3], 3, "ap_mac");
    auto begin = text::parse_int(f[4]);
    if (!begin) field_error(4, "lease_begin", f[4]);
    auto end = text::parse_int(f[5]);
    if (!end) field_error(5, "lease_end", f[5]);
    e.lease_begin = *begin * kMsPerSecond;
    e.lease_end = *end * kMsPerSecond;
    if (e.lease_end < e.lease_begin) field_error(5, "lease_end", fmt::format("{} precedes lease_begin", f[5]));
    return e;
}

std::string format_netflow_line(const FlowRecord& f, char d) {
    return fmt::format("{}{}{}{}{}{}{}{}{}{}{}{}{}{}{}{}{}{}{}", text::format_seconds_ms(f.start), d,
                       text::format_seconds_ms(f.finish), d, text::format_seconds_ms(f.duration), d,
                       f.src_ip.str(), d, f.dst_ip.str(), d, to_string(f.protocol), d, f.src_port, d,
                       f.dst_port, d, f.packet_count, d, f.flow_bytes);
}

std::string format_ap_event_line(const ApEvent& e, char d) {
    return fmt::format("{}{}{}{}{}{}{}{}{}{}{}", e.user_ip.str(), d, e.user_mac.str(), d, e.ap_name, d,
                       e.ap_mac.str(), d, text::format_seconds(e.lease_begin), d,
                       text::format_seconds(e.lease_end));
}

std::vector<FlowRecord> read_netflow(const std::filesystem::path& path, ParseStats* stats, char delim) {
    auto in = io::open_input(path);
    auto reader = netflow_reader(in, delim);
    std::vector<FlowRecord> out;
    FlowRecord r;
    while (reader.next(r)) out.push_back(r);
    if (stats) stats->merge(reader.stats());
    return out;
}

std::vector<ApEvent> read_ap_events(const std::filesystem::path& path, ParseStats* stats, char delim) {
    auto in = io::open_input(path);
    auto reader = ap_event_reader(in, delim);
    std::vector<ApEvent> out;
    ApEvent e;
    while (reader.next(e)) out.push_back(std::move(e));
    if (stats) stats->merge(reader.stats());
    return out;
}

void write_netflow(std::ostream& out, const std::vector<FlowRecord>& flows, char delim) {
    out << text::kFormatTag << '\n';
    for (const auto& f : flows) out << format_netflow_line(f, delim) << '\n';
}

void write_ap_events(std::ostream& out, const std::vector<ApEvent>& events, char delim) {
    out << text::kFormatTag << '\n';
    for (const auto& e : events) out << format_ap_event_line(e, delim) << '\n';
}

// ---------------------------------------------------------------------------
// Building registry

std::optional<BuildingId> BuildingRegistry::resolve(std::string_view ap_name) const {
    std::optional<BuildingId> best;
    std::size_t best_len = 0;
    // Rules are few; a linear scan keeps longest-prefix semantics obvious.
    for (const auto& [prefix, id] : rules) {
        if (prefix.size() >= best_len && ap_name.substr(0, prefix.size()) == prefix) {
            best = id;
            best_len = prefix.size();
        }
    }
    return best;
}

const Building* BuildingRegistry::find(BuildingId id) const {
    auto it = buildings.find(id);
    return it == buildings.end() ? nullptr : &it->second;
}

namespace {

template <class Fn>
void for_each_data_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = text::trim(line);
        if (t.empty() || t.front() == '#' || t == text::kFormatTag) continue;
        fn(t, lineno);
    }
}

}  // namespace

BuildingRegistry load_building_registry(std::istream& in) {
    BuildingRegistry reg;
    for_each_data_line(in, [&](std::string_view line, std::size_t lineno) {
        auto f = text::split(line, ',');
        auto bad = [&](std::string_view why) {
            throw Error(Errc::BadFormat, fmt::format("building registry line {}: {}", lineno, why));
        };
        if (f[0] == "building") {
            if (f.size() != 6) bad("building rows have 6 fields");
            auto id = text::parse_int(f[1]);
            auto cat = building_category_from_string(f[3]);
            auto lat = text::parse_double(f[4]);
            auto lon = text::parse_double(f[5]);
            if (!id || !cat || !lat || !lon) bad("unparseable building row");
            Building b{static_cast<BuildingId>(*id), std::string(f[2]), *cat, *lat, *lon};
            if (auto v = validate(b); !v.empty()) bad(v.front());
            if (!reg.buildings.emplace(b.id, b).second)
                throw Error(Errc::DuplicateBuilding, fmt::format("duplicate building id {}", b.id));
        } else if (f[0] == "rule") {
            if (f.size() != 3) bad("rule rows have 3 fields");
            auto id = text::parse_int(f[2]);
            if (!id || f[1].empty()) bad("unparseable rule row");
            if (!reg.rules.emplace(std::string(f[1]), static_cast<BuildingId>(*id)).second)
                throw Error(Errc::DuplicateBuilding, fmt::format("duplicate rule prefix '{}'", f[1]));
        } else {
            bad(fmt::format("unknown row kind '{}'", f[0]));
        }
    });
    for (const auto& [prefix, id] : reg.rules)
        if (!reg.buildings.count(id))
            throw Error(Errc::DanglingRule, fmt::format("rule '{}' names unknown building {}", prefix, id));
    return reg;
}

BuildingRegistry load_building_registry(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return load_building_registry(in);
}

void write_building_registry(std::ostream& out, const BuildingRegistry& reg) {
    out << text::kFormatTag << '\n';
    for (const auto& [id, b] : reg.buildings)
        out << fmt::format("building,{},{},{},{},{}\n", id, b.name, to_string(b.category),
                           text::format_double(b.lat), text::format_double(b.lon));
    for (const auto& [prefix, id] : reg.rules) out << fmt::format("rule,{},{}\n", prefix, id);
}

std::optional<BuildingId> ApNameResolver::operator()(const std::string& ap_name) {
    auto it = cache_.find(ap_name);
    if (it == cache_.end()) {
        std::optional<BuildingId> id = registry_ ? registry_->resolve(ap_name) : std::nullopt;
        if (!id) ++unmatched_names_;
        it = cache_.emplace(ap_name, id).first;
    }
    if (!it->second) ++unmatched_;
    return it->second;
}

// ---------------------------------------------------------------------------
// OUI labels

std::string_view to_string(Label l) {
    switch (l) {
        case Label::Flute: return "flute";
        case Label::Cello: return "cello";
        case Label::Both: return "both";
        case Label::Unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(LabelSource s) {
    switch (s) {
        case LabelSource::Survey: return "survey";
        case LabelSource::Registry: return "registry";
        case LabelSource::Heuristic: return "heuristic";
    }
    return "heuristic";
}

std::optional<Label> label_from_string(std::string_view text) {
    for (auto l : {Label::Flute, Label::Cello, Label::Both, Label::Unknown})
        if (text::iequals(text, to_string(l))) return l;
    return std::nullopt;
}

std::optional<LabelSource> label_source_from_string(std::string_view text) {
    for (auto s : {LabelSource::Survey, LabelSource::Registry, LabelSource::Heuristic})
        if (text::iequals(text, to_string(s))) return s;
    return std::nullopt;
}

bool OuiLabelTable::assign(const OuiLabel& label) {
    auto it = labels_.find(label.oui);
    if (it != labels_.end()) {
        if (label.source < it->second.source || it->second == label) return false;
        history_.push_back({label.oui, it->second, label});
        it->second = label;
        return true;
    }
    history_.push_back({label.oui, std::nullopt, label});
    labels_.emplace(label.oui, label);
    return true;
}

const OuiLabel* OuiLabelTable::find(const Oui& oui) const {
    auto it = labels_.find(oui);
    return it == labels_.end() ? nullptr : &it->second;
}

OuiLabelTable load_oui_labels(std::istream& in) {
    OuiLabelTable table;
    for_each_data_line(in, [&](std::string_view line, std::size_t lineno) {
        auto f = text::split(line, ',');
        auto oui = f.size() == 3 ? Oui::try_parse(f[0]) : std::nullopt;
        auto label = f.size() == 3 ? label_from_string(f[1]) : std::nullopt;
        auto source = f.size() == 3 ? label_source_from_string(f[2]) : std::nullopt;
        if (!oui || !label || !source)
            throw Error(Errc::BadFormat, fmt::format("OUI label line {}: expected <oui>,<label>,<source>", lineno));
        if (table.find(*oui))
            throw Error(Errc::DuplicateOui, fmt::format("duplicate OUI {}", oui->str()));
        table.assign({*oui, *label, *source});
    });
    return table;
}

OuiLabelTable load_oui_labels(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return load_oui_labels(in);
}

void write_oui_labels(std::ostream& out, const OuiLabelTable& table) {
    out << text::kFormatTag << '\n';
    for (const auto& [oui, l] : table.entries())
        out << fmt::format("{},{},{}\n", oui.str(), to_string(l.label), to_string(l.source));
}

DnsMap load_dns_map(std::istream& in) {
    DnsMap map;
    for_each_data_line(in, [&](std::string_view line, std::size_t lineno) {
        auto f = text::split(line, ',');
        auto ip = f.size() == 2 ? Ipv4::try_parse(f[0]) : std::nullopt;
        if (!ip || f[1].empty())
            throw Error(Errc::BadFormat, fmt::format("DNS map line {}: expected <ip>,<domain>", lineno));
        map[*ip] = text::to_lower(f[1]);
    });
    return map;
}

DnsMap load_dns_map(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return load_dns_map(in);
}

void write_dns_map(std::ostream& out, const DnsMap& map) {
    std::map<Ipv4, std::string> sorted(map.begin(), map.end());
    out << text::kFormatTag << '\n';
    for (const auto& [ip, domain] : sorted) out << ip.str() << ',' << domain << '\n';
}

}  // namespace flames::ingest
