#include "flames/features.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>

#include "flames/error.hpp"
#include "flames/io.hpp"
#include "flames/text.hpp"

namespace flames::features {

std::vector<std::string> mobility_names() {
    return {MobilityFeatures::kNames.begin(), MobilityFeatures::kNames.end()};
}

std::vector<std::string> traffic_names() { return {TrafficFeatures::kNames.begin(), TrafficFeatures::kNames.end()}; }

std::vector<std::string> all_names() {
    auto n = mobility_names();
    for (auto& t : traffic_names()) n.push_back(t);
    return n;
}

std::vector<FeatureRow> join(std::span<const mobility::DailyMobilityRow> mobility,
                             std::span<const traffic::DailyTrafficRow> traffic) {
    std::map<std::pair<MacAddress, DayKey>, const mobility::DailyMobilityRow*> mob;
    for (const auto& m : mobility) mob[{m.device, m.day}] = &m;
    std::vector<FeatureRow> rows;
    for (const auto& t : traffic) {
        auto it = mob.find({t.device, t.day});
        if (it == mob.end()) continue;
        rows.push_back({t.device, t.day, t.type, it->second->features, t.features});
    }
    std::sort(rows.begin(), rows.end(), [](const FeatureRow& a, const FeatureRow& b) {
        return std::tie(a.device, a.day) < std::tie(b.device, b.day);
    });
    return rows;
}

void write_table(std::ostream& out, std::span<const FeatureRow> rows) {
    out << text::kFormatTag << '\n' << "device,day,type";
    for (const auto& n : all_names()) out << ',' << n;
    out << '\n';
    for (const auto& r : rows) {
        out << r.device.str() << ',' << r.day.str() << ',' << to_string(r.type);
        for (double v : r.mobility.values()) out << ',' << text::format_double(v);
        for (double v : r.traffic.values()) out << ',' << text::format_double(v);
        out << '\n';
    }
}

std::vector<FeatureRow> read_table(std::istream& in) {
    std::vector<FeatureRow> rows;
    std::string line;
    std::vector<std::string_view> f;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t == text::kFormatTag || t.starts_with("device,") || t.starts_with('#')) continue;
        text::split(t, ',', f);
        if (f.size() != 3 + 8 + 11)
            throw Error(Errc::MalformedLine, "feature table line " + std::to_string(lineno) + ": wrong field count");
        FeatureRow r;
        r.device = MacAddress::parse(f[0]);
        r.day = DayKey::parse(f[1]);
        auto type = device_type_from_string(f[2]);
        if (!type) throw Error(Errc::FieldParse, "feature table line " + std::to_string(lineno) + ": bad type", 2);
        r.type = *type;
        std::array<double, 8> m{};
        std::array<double, 11> tr{};
        for (std::size_t i = 0; i < 19; ++i) {
            auto v = text::parse_double(f[3 + i]);
            if (!v)
                throw Error(Errc::FieldParse, "feature table line " + std::to_string(lineno) + ": bad number",
                            static_cast<int>(3 + i));
            (i < 8 ? m[i] : tr[i - 8]) = *v;
        }
        r.mobility = MobilityFeatures::from_values(m);
        r.traffic = TrafficFeatures::from_values(tr);
        rows.push_back(r);
    }
    return rows;
}

std::vector<FeatureRow> read_table(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return read_table(in);
}

namespace {

// Reads the numeric tail of a daily table line starting at field `first`.
template <std::size_t N>
std::array<double, N> numbers(const std::vector<std::string_view>& f, std::size_t first, std::size_t lineno) {
    std::array<double, N> v{};
    for (std::size_t i = 0; i < N; ++i) {
        auto x = text::parse_double(f[first + i]);
        if (!x)
            throw Error(Errc::FieldParse, "line " + std::to_string(lineno) + ": bad number",
                        static_cast<int>(first + i));
        v[i] = *x;
    }
    return v;
}

template <class Fn>
void each_data_line(const std::filesystem::path& path, std::size_t fields, Fn&& fn) {
    auto in = io::open_input(path);
    std::string line;
    std::vector<std::string_view> f;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t == text::kFormatTag || t.starts_with("device,") || t.starts_with('#')) continue;
        text::split(t, ',', f);
        if (f.size() != fields)
            throw Error(Errc::MalformedLine,
                        path.string() + " line " + std::to_string(lineno) + ": wrong field count");
        fn(f, lineno);
    }
}

}  // namespace

void write_mobility_table(std::ostream& out, std::span<const mobility::DailyMobilityRow> rows) {
    out << text::kFormatTag << '\n' << "device,day";
    for (const auto& n : mobility_names()) out << ',' << n;
    out << '\n';
    for (const auto& r : rows) {
        out << r.device.str() << ',' << r.day.str();
        for (double v : r.features.values()) out << ',' << text::format_double(v);
        out << '\n';
    }
}

std::vector<mobility::DailyMobilityRow> read_mobility_table(const std::filesystem::path& path) {
    std::vector<mobility::DailyMobilityRow> rows;
    each_data_line(path, 2 + 8, [&](const std::vector<std::string_view>& f, std::size_t lineno) {
        rows.push_back({MacAddress::parse(f[0]), DayKey::parse(f[1]),
                        MobilityFeatures::from_values(numbers<8>(f, 2, lineno))});
    });
    return rows;
}

void write_traffic_table(std::ostream& out, std::span<const traffic::DailyTrafficRow> rows) {
    out << text::kFormatTag << '\n' << "device,day,type";
    for (const auto& n : traffic_names()) out << ',' << n;
    out << '\n';
    for (const auto& r : rows) {
        out << r.device.str() << ',' << r.day.str() << ',' << to_string(r.type);
        for (double v : r.features.values()) out << ',' << text::format_double(v);
        out << '\n';
    }
}

std::vector<traffic::DailyTrafficRow> read_traffic_table(const std::filesystem::path& path) {
    std::vector<traffic::DailyTrafficRow> rows;
    each_data_line(path, 3 + 11, [&](const std::vector<std::string_view>& f, std::size_t lineno) {
        auto type = device_type_from_string(f[2]);
        if (!type) throw Error(Errc::FieldParse, "line " + std::to_string(lineno) + ": bad type", 2);
        rows.push_back({MacAddress::parse(f[0]), DayKey::parse(f[1]), *type,
                        TrafficFeatures::from_values(numbers<11>(f, 3, lineno))});
    });
    return rows;
}

double value(const FeatureRow& row, std::string_view name) {
    const auto m = row.mobility.values();
    for (std::size_t i = 0; i < m.size(); ++i)
        if (MobilityFeatures::kNames[i] == name) return m[i];
    const auto t = row.traffic.values();
    for (std::size_t i = 0; i < t.size(); ++i)
        if (TrafficFeatures::kNames[i] == name) return t[i];
    if (name == "weekend") return row.weekend() ? 1.0 : 0.0;
    throw Error(Errc::ModelFeatureMismatch, "unknown feature '" + std::string(name) + "'");
}

Eigen::MatrixXd matrix(std::span<const FeatureRow> rows, const std::vector<std::string>& names) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < names.size(); ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value(rows[i], names[j]);
    return x;
}

FeatureSet feature_set_from_string(std::string_view s) {
    for (auto f : {FeatureSet::Mobility, FeatureSet::Traffic, FeatureSet::Combined, FeatureSet::CombinedDayClass})
        if (to_string(f) == s) return f;
    throw Error(Errc::BadFormat, "unknown feature set '" + std::string(s) + "'");
}

std::string_view to_string(FeatureSet s) {
    switch (s) {
        case FeatureSet::Mobility: return "mobility";
        case FeatureSet::Traffic: return "traffic";
        case FeatureSet::Combined: return "combined";
        case FeatureSet::CombinedDayClass: return "combined-dayclass";
    }
    return "?";
}

Dataset make_dataset(std::span<const FeatureRow> rows, FeatureSet set) {
    Dataset d;
    std::vector<FeatureRow> kept;
    for (const auto& r : rows) {
        if (r.type == DeviceType::Unknown) continue;
        kept.push_back(r);
        d.y.push_back(r.type == DeviceType::Flute ? 1 : -1);
        d.weekend.push_back(r.weekend());
    }
    switch (set) {
        case FeatureSet::Mobility: d.names = mobility_names(); break;
        case FeatureSet::Traffic: d.names = traffic_names(); break;
        case FeatureSet::Combined:
        case FeatureSet::CombinedDayClass: d.names = all_names(); break;
    }
    d.x = matrix(kept, d.names);
    if (set == FeatureSet::CombinedDayClass) {
        const auto p = d.x.cols();
        Eigen::MatrixXd wide(d.x.rows(), 2 * p + 1);
        wide.leftCols(p) = d.x;
        for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
            const double w = d.weekend[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
            wide(i, p) = w;
            wide.block(i, p + 1, 1, p) = w * d.x.row(i);
        }
        const auto base = d.names;
        d.names.push_back("weekend");
        for (const auto& n : base) d.names.push_back(n + "_we");
        d.x = std::move(wide);
    }
    return d;
}

}  // namespace flames::features
