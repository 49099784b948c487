#pragma once

// Per-device-day feature table joining mobility and traffic rows, and the
// model matrices built from it.

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flames/core.hpp"
#include "flames/mobility.hpp"
#include "flames/traffic.hpp"

namespace flames::features {

struct FeatureRow {
    MacAddress device;
    DayKey day;
    DeviceType type = DeviceType::Unknown;
    MobilityFeatures mobility;
    TrafficFeatures traffic;
    bool weekend() const { return day.is_weekend(); }
};

std::vector<std::string> mobility_names();
std::vector<std::string> traffic_names();
std::vector<std::string> all_names();  // mobility then traffic

// Inner join on (device, day); device type comes from the traffic rows.
// Output is ordered by (device, day).
std::vector<FeatureRow> join(std::span<const mobility::DailyMobilityRow> mobility,
                             std::span<const traffic::DailyTrafficRow> traffic);

void write_table(std::ostream& out, std::span<const FeatureRow> rows);

// Per-stage daily tables: device,day[,type],<metrics>.
void write_mobility_table(std::ostream& out, std::span<const mobility::DailyMobilityRow> rows);
std::vector<mobility::DailyMobilityRow> read_mobility_table(const std::filesystem::path& path);
void write_traffic_table(std::ostream& out, std::span<const traffic::DailyTrafficRow> rows);
std::vector<traffic::DailyTrafficRow> read_traffic_table(const std::filesystem::path& path);
std::vector<FeatureRow> read_table(std::istream& in);
std::vector<FeatureRow> read_table(const std::filesystem::path& path);

double value(const FeatureRow& row, std::string_view name);

// Matrix of the named columns, one row per table row.
Eigen::MatrixXd matrix(std::span<const FeatureRow> rows, const std::vector<std::string>& names);

enum class FeatureSet { Mobility, Traffic, Combined, CombinedDayClass };

FeatureSet feature_set_from_string(std::string_view s);
std::string_view to_string(FeatureSet s);

struct Dataset {
    Eigen::MatrixXd x;
    std::vector<int> y;  // +1 flute, -1 cello
    std::vector<std::string> names;
    std::vector<bool> weekend;
};

// Flute and cello rows only. CombinedDayClass appends a weekend indicator and
// every combined feature multiplied by it.
Dataset make_dataset(std::span<const FeatureRow> rows, FeatureSet set);

}  // namespace flames::features
