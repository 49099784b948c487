#pragma once

// Streaming parsers for the input artifacts: NetFlow exports, AP association
// logs, the building registry and the OUI label table.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flames/core.hpp"
#include "flames/error.hpp"

namespace flames::ingest {

inline constexpr std::size_t kNetflowFields = 10;
inline constexpr std::size_t kApEventFields = 6;

// Throws Error{MalformedLine} on a wrong field count and Error{FieldParse}
// (with the column index) on a bad field.
FlowRecord parse_netflow_line(std::string_view line, char delim = ',');
ApEvent parse_ap_event_line(std::string_view line, char delim = ',');

std::string format_netflow_line(const FlowRecord& f, char delim = ',');
std::string format_ap_event_line(const ApEvent& e, char delim = ',');

struct ParseStats {
    std::uint64_t lines = 0;
    std::uint64_t records = 0;
    std::uint64_t skipped = 0;
    // Blank lines, comments and header lines.
    std::uint64_t ignored = 0;
    std::uint64_t malformed = 0;
    std::uint64_t field_errors = 0;
    std::vector<std::string> sample_errors;

    void merge(const ParseStats& other);
};

// True for lines that carry no record: blank, '#' comments, the format tag,
// or a column-header line (only considered on the first line).
bool is_ignorable_line(std::string_view line, bool first_line);

// Pulls one record at a time from a stream; bad lines are skipped and counted.
// Memory use is one line buffer regardless of input length.
template <class Record>
class RecordReader {
public:
    using ParseFn = Record (*)(std::string_view, char);

    RecordReader(std::istream& in, char delim, ParseFn parse) : in_(in), delim_(delim), parse_(parse) {}

    bool next(Record& out) {
        while (std::getline(in_, line_)) {
            ++stats_.lines;
            const bool first = stats_.lines == 1;
            if (is_ignorable_line(line_, first)) {
                ++stats_.ignored;
                continue;
            }
            try {
                out = parse_(line_, delim_);
                ++stats_.records;
                return true;
            } catch (const Error& e) {
                ++stats_.skipped;
                if (e.code() == Errc::MalformedLine)
                    ++stats_.malformed;
                else
                    ++stats_.field_errors;
                if (stats_.sample_errors.size() < kMaxSampleErrors)
                    stats_.sample_errors.push_back("line " + std::to_string(stats_.lines) + ": " + e.what());
            }
        }
        return false;
    }

    const ParseStats& stats() const { return stats_; }

private:
    static constexpr std::size_t kMaxSampleErrors = 8;
    std::istream& in_;
    char delim_;
    ParseFn parse_;
    std::string line_;
    ParseStats stats_;
};

using NetflowReader = RecordReader<FlowRecord>;
using ApEventReader = RecordReader<ApEvent>;

inline NetflowReader netflow_reader(std::istream& in, char delim = ',') {
    return NetflowReader(in, delim, &parse_netflow_line);
}
inline ApEventReader ap_event_reader(std::istream& in, char delim = ',') {
    return ApEventReader(in, delim, &parse_ap_event_line);
}

// Whole-file convenience loaders.
std::vector<FlowRecord> read_netflow(const std::filesystem::path& path, ParseStats* stats = nullptr,
                                     char delim = ',');
std::vector<ApEvent> read_ap_events(const std::filesystem::path& path, ParseStats* stats = nullptr,
                                    char delim = ',');
void write_netflow(std::ostream& out, const std::vector<FlowRecord>& flows, char delim = ',');
void write_ap_events(std::ostream& out, const std::vector<ApEvent>& events, char delim = ',');

// Buildings plus AP-name prefix rules.
//
//   flames-v1
//   building,<id>,<name>,<category>,<lat>,<lon>
//   rule,<ap-name-prefix>,<building-id>
struct BuildingRegistry {
    std::map<BuildingId, Building> buildings;
    std::map<std::string, BuildingId, std::less<>> rules;

    // Longest matching prefix wins.
    std::optional<BuildingId> resolve(std::string_view ap_name) const;
    const Building* find(BuildingId id) const;
};

BuildingRegistry load_building_registry(std::istream& in);
BuildingRegistry load_building_registry(const std::filesystem::path& path);
void write_building_registry(std::ostream& out, const BuildingRegistry& reg);

// Memoizing resolver that counts AP names without a rule.
class ApNameResolver {
public:
    explicit ApNameResolver(const BuildingRegistry* registry) : registry_(registry) {}

    std::optional<BuildingId> operator()(const std::string& ap_name);
    std::uint64_t unmatched() const { return unmatched_; }
    std::uint64_t unmatched_names() const { return unmatched_names_; }

private:
    const BuildingRegistry* registry_;
    std::unordered_map<std::string, std::optional<BuildingId>> cache_;
    std::uint64_t unmatched_ = 0;
    std::uint64_t unmatched_names_ = 0;
};

enum class Label : std::uint8_t { Flute, Cello, Both, Unknown };
enum class LabelSource : std::uint8_t { Heuristic = 0, Registry = 1, Survey = 2 };

std::string_view to_string(Label l);
std::string_view to_string(LabelSource s);
std::optional<Label> label_from_string(std::string_view text);
std::optional<LabelSource> label_source_from_string(std::string_view text);

struct OuiLabel {
    Oui oui;
    Label label = Label::Unknown;
    LabelSource source = LabelSource::Heuristic;

    bool operator==(const OuiLabel&) const = default;
};

// One label per OUI. assign() never replaces a label with one from a
// lower-priority source (Survey > Registry > Heuristic).
class OuiLabelTable {
public:
    struct Change {
        Oui oui;
        std::optional<OuiLabel> before;
        OuiLabel after;
    };

    // Returns true when the table changed.
    bool assign(const OuiLabel& label);
    const OuiLabel* find(const Oui& oui) const;
    std::size_t size() const { return labels_.size(); }
    const std::map<Oui, OuiLabel>& entries() const { return labels_; }
    const std::vector<Change>& history() const { return history_; }

private:
    std::map<Oui, OuiLabel> labels_;
    std::vector<Change> history_;
};

//   flames-v1
//   <oui>,<flute|cello|both|unknown>,<survey|registry|heuristic>
OuiLabelTable load_oui_labels(std::istream& in);
OuiLabelTable load_oui_labels(const std::filesystem::path& path);
void write_oui_labels(std::ostream& out, const OuiLabelTable& table);

// Destination IP to domain, standing in for reverse DNS.
//   flames-v1
//   <ip>,<domain>
using DnsMap = std::unordered_map<Ipv4, std::string>;
DnsMap load_dns_map(std::istream& in);
DnsMap load_dns_map(const std::filesystem::path& path);
void write_dns_map(std::ostream& out, const DnsMap& map);

}  // namespace flames::ingest
