#pragma once

// Flute/cello labeling: OUI lookup, the ad-network heuristic, and coverage.

#include <cstdint>
#include <set>
#include <span>
#include <string>

#include "flames/core.hpp"
#include "flames/ingest.hpp"

namespace flames::classify {

// "Both" and absent OUIs are Unknown at this stage.
DeviceType classify_by_oui(const MacAddress& mac, const ingest::OuiLabelTable& labels);

struct AdHeuristicOptions {
    std::string ad_domain = "admob.com";
    // Minimum number of distinct devices of an OUI seen contacting the ad
    // domain before the OUI is considered.
    std::size_t min_devices = 1;
};

struct AdHeuristicResult {
    std::set<Oui> contacting_ouis;
    std::set<Oui> newly_labeled;
};

// OUIs of devices with a flow toward the ad domain become Flute(Heuristic)
// when currently unlabeled or labeled Unknown. Higher-priority labels,
// including "both", are never touched.
AdHeuristicResult admob_heuristic(std::span<const CoreFlow> core, const ingest::DnsMap& dns,
                                  ingest::OuiLabelTable& labels, const AdHeuristicOptions& opts = {});

// Domain equality or subdomain match.
bool matches_domain(std::string_view host, std::string_view domain);

struct CoverageReport {
    std::size_t ap_devices = 0;
    std::size_t ap_labeled = 0;
    std::size_t core_devices = 0;
    std::size_t core_labeled = 0;
    std::size_t flutes = 0;  // among AP-log devices
    std::size_t cellos = 0;
    // Set when a population is empty; the matching fraction is reported as 0.
    bool ap_empty = false;
    bool core_empty = false;

    double ap_fraction() const { return ap_devices ? double(ap_labeled) / double(ap_devices) : 0.0; }
    double core_fraction() const { return core_devices ? double(core_labeled) / double(core_devices) : 0.0; }
    double flute_share() const {
        auto n = flutes + cellos;
        return n ? double(flutes) / double(n) : 0.0;
    }
};

CoverageReport classification_report(const ingest::OuiLabelTable& labels, const std::set<MacAddress>& ap_devices,
                                      const std::set<MacAddress>& core_devices);

// Rewrites device_type on CORE rows from the label table.
void relabel(std::span<CoreFlow> core, const ingest::OuiLabelTable& labels);

}  // namespace flames::classify
