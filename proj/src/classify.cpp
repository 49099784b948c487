#include "flames/classify.hpp"

#include <map>

#include "flames/text.hpp"

namespace flames::classify {

DeviceType classify_by_oui(const MacAddress& mac, const ingest::OuiLabelTable& labels) {
    const auto* l = labels.find(mac.oui());
    if (!l) return DeviceType::Unknown;
    switch (l->label) {
        case ingest::Label::Flute: return DeviceType::Flute;
        case ingest::Label::Cello: return DeviceType::Cello;
        default: return DeviceType::Unknown;
    }
}

bool matches_domain(std::string_view host, std::string_view domain) {
    if (host.size() < domain.size()) return false;
    if (!text::iequals(host.substr(host.size() - domain.size()), domain)) return false;
    return host.size() == domain.size() || host[host.size() - domain.size() - 1] == '.';
}

AdHeuristicResult admob_heuristic(std::span<const CoreFlow> core, const ingest::DnsMap& dns,
                                  ingest::OuiLabelTable& labels, const AdHeuristicOptions& opts) {
    std::map<Oui, std::set<MacAddress>> devices_by_oui;
    for (const auto& c : core) {
        // The remote end of the flow is whichever side is not the device.
        const Ipv4 remote = c.direction == Direction::Outbound ? c.flow.dst_ip : c.flow.src_ip;
        auto it = dns.find(remote);
        if (it != dns.end() && matches_domain(it->second, opts.ad_domain))
            devices_by_oui[c.device_mac.oui()].insert(c.device_mac);
    }
    AdHeuristicResult result;
    for (const auto& [oui, devices] : devices_by_oui) {
        if (devices.size() < opts.min_devices) continue;
        result.contacting_ouis.insert(oui);
        const auto* current = labels.find(oui);
        if (current && current->label != ingest::Label::Unknown) continue;
        if (labels.assign({oui, ingest::Label::Flute, ingest::LabelSource::Heuristic})) result.newly_labeled.insert(oui);
    }
    return result;
}

CoverageReport classification_report(const ingest::OuiLabelTable& labels, const std::set<MacAddress>& ap_devices,
                                      const std::set<MacAddress>& core_devices) {
    CoverageReport r;
    r.ap_devices = ap_devices.size();
    r.core_devices = core_devices.size();
    r.ap_empty = ap_devices.empty();
    r.core_empty = core_devices.empty();
    for (const auto& mac : ap_devices) {
        auto t = classify_by_oui(mac, labels);
        if (t == DeviceType::Unknown) continue;
        ++r.ap_labeled;
        (t == DeviceType::Flute ? r.flutes : r.cellos)++;
    }
    for (const auto& mac : core_devices)
        if (classify_by_oui(mac, labels) != DeviceType::Unknown) ++r.core_labeled;
    return r;
}

void relabel(std::span<CoreFlow> core, const ingest::OuiLabelTable& labels) {
    for (auto& c : core) c.device_type = classify_by_oui(c.device_mac, labels);
}

}  // namespace flames::classify
