#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cli.hpp"
#include "flames/error.hpp"
#include "flames/io.hpp"
#include "flames/text.hpp"

namespace flames::cli {

namespace {

using text::format_double;

template <class Fn>
fs::path emit(Stage& st, const std::string& file, Fn&& write) {
    const auto p = st.output(file);
    auto out = io::open_output(p);
    write(out);
    return p;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::string day_class(bool weekend) { return weekend ? "weekend" : "weekday"; }

void write_parse_stats(std::ostream& out, const std::string& what, const ingest::ParseStats& s) {
    out << what << ".lines = " << s.lines << '\n';
    out << what << ".records = " << s.records << '\n';
    out << what << ".ignored = " << s.ignored << '\n';
    out << what << ".malformed = " << s.malformed << '\n';
    out << what << ".field_errors = " << s.field_errors << '\n';
    for (const auto& e : s.sample_errors) out << "# " << what << ": " << e << '\n';
}

std::vector<features::FeatureRow> load_features(Stage& st, const fs::path& p) {
    st.input(p);
    auto rows = features::read_table(p);
    st.progress("{} feature rows", rows.size());
    return rows;
}

const features::FeatureSet kAllSets[] = {features::FeatureSet::Mobility, features::FeatureSet::Traffic,
                                         features::FeatureSet::Combined, features::FeatureSet::CombinedDayClass};

std::vector<features::FeatureSet> or_all(std::vector<features::FeatureSet> sets) {
    if (sets.empty()) sets.assign(std::begin(kAllSets), std::end(kAllSets));
    return sets;
}

}  // namespace

TestgenResult run_testgen(const Context& ctx, const std::optional<fs::path>& spec_file, const fs::path& out) {
    Stage st("testgen", out, ctx);
    if (spec_file) st.input(*spec_file);
    const auto spec = ctx.population();
    st.set_seed(spec.seed);
    st.param("devices", std::to_string(spec.flute.devices + spec.cello.devices));
    st.param("days", std::to_string(spec.days));
    const auto traces = synth::generate_traces(spec);
    st.progress("{} AP events, {} flows, {} devices", traces.ap_events.size(), traces.flows.size(),
                traces.devices.size());
    synth::write_traces(out, spec, traces);
    TestgenResult r;
    r.files = {st.output("aplog.csv"), st.output("netflow.csv"), st.output("buildings.csv"), st.output("ouis.csv"),
               st.output("dns.csv")};
    r.truth = st.output("truth.txt");
    st.finish();
    return r;
}

TraceInputs run_ingest(const Context& ctx, const TraceInputs& in, const fs::path& out) {
    Stage st("ingest", out, ctx);
    for (const auto& p : {in.aplog, in.netflow, in.buildings, in.ouis, in.dns}) st.input(p);

    ingest::ParseStats ap_stats, nf_stats;
    std::vector<ApEvent> events;
    {
        auto is = io::open_input(in.aplog);
        auto reader = ingest::ap_event_reader(is);
        for (ApEvent e; reader.next(e);) events.push_back(std::move(e));
        ap_stats = reader.stats();
    }
    std::vector<FlowRecord> flows;
    {
        auto is = io::open_input(in.netflow);
        auto reader = ingest::netflow_reader(is);
        for (FlowRecord f; reader.next(f);) flows.push_back(f);
        nf_stats = reader.stats();
    }
    std::uint64_t ap_invalid = 0, nf_invalid = 0;
    for (const auto& e : events) ap_invalid += !validate(e).empty();
    for (const auto& f : flows) nf_invalid += !validate(f).empty();
    st.progress("{} AP events ({} skipped), {} flows ({} skipped)", events.size(), ap_stats.skipped, flows.size(),
                nf_stats.skipped);

    const auto registry = ingest::load_building_registry(in.buildings);
    const auto labels = ingest::load_oui_labels(in.ouis);
    const auto dns = ingest::load_dns_map(in.dns);

    TraceInputs r;
    r.aplog = emit(st, "aplog.csv", [&](std::ostream& o) { ingest::write_ap_events(o, events); });
    r.netflow = emit(st, "netflow.csv", [&](std::ostream& o) { ingest::write_netflow(o, flows); });
    r.buildings = emit(st, "buildings.csv", [&](std::ostream& o) { ingest::write_building_registry(o, registry); });
    r.ouis = emit(st, "ouis.csv", [&](std::ostream& o) { ingest::write_oui_labels(o, labels); });
    r.dns = emit(st, "dns.csv", [&](std::ostream& o) { ingest::write_dns_map(o, dns); });
    emit(st, "ingest_report.txt", [&](std::ostream& o) {
        write_parse_stats(o, "aplog", ap_stats);
        o << "aplog.invariant_violations = " << ap_invalid << '\n';
        write_parse_stats(o, "netflow", nf_stats);
        o << "netflow.invariant_violations = " << nf_invalid << '\n';
        o << "buildings = " << registry.buildings.size() << '\n';
        o << "ap_rules = " << registry.rules.size() << '\n';
        o << "oui_labels = " << labels.size() << '\n';
        o << "dns_entries = " << dns.size() << '\n';
    });
    st.finish();
    return r;
}

FuseFiles run_fuse(const Context& ctx, const TraceInputs& in, const fs::path& out) {
    Stage st("fuse", out, ctx);
    for (const auto& p : {in.aplog, in.netflow, in.buildings, in.ouis}) st.input(p);
    st.param("lease_max_gap_ms", std::to_string(ctx.opts.lease_max_gap));
    ingest::ParseStats ap_stats, nf_stats;
    auto events = ingest::read_ap_events(in.aplog, &ap_stats);
    const auto flows = ingest::read_netflow(in.netflow, &nf_stats);
    const auto registry = ingest::load_building_registry(in.buildings);
    const auto labels = ingest::load_oui_labels(in.ouis);
    st.progress("{} AP events, {} flows", events.size(), flows.size());

    const auto fused = pipeline::run_fuse(std::move(events), flows, registry, labels, ctx.opts);
    const auto& d = fused.leases;
    const auto& m = fused.stats;
    std::uint64_t no_building = 0;
    for (const auto& l : d.leases) no_building += !l.building_id.has_value();
    st.progress("{} leases, {} of {} flows matched, {} CORE rows", d.leases.size(), m.matched, m.total,
                fused.core.size());

    FuseFiles r;
    r.leases = emit(st, "leases.csv", [&](std::ostream& o) { fuse::write_leases(o, d.leases); });
    r.core = emit(st, "core.csv", [&](std::ostream& o) { fuse::write_core(o, fused.core); });
    emit(st, "fuse_report.txt", [&](std::ostream& o) {
        write_parse_stats(o, "aplog", ap_stats);
        write_parse_stats(o, "netflow", nf_stats);
        o << "leases = " << d.leases.size() << '\n';
        o << "leases_without_building = " << no_building << '\n';
        o << "dropped_zero_length = " << d.dropped_zero_length << '\n';
        o << "dropped_gap = " << d.dropped_gap << '\n';
        o << "discarded_last = " << d.discarded_last << '\n';
        o << "flows_total = " << m.total << '\n';
        o << "flows_matched = " << m.matched << '\n';
        o << "flows_unmatched = " << m.unmatched << '\n';
        o << "flows_two_sided = " << m.two_sided << '\n';
        o << "core_records = " << m.core_records << '\n';
    });
    st.finish();
    return r;
}

ClassifyFiles run_classify(const Context& ctx, const fs::path& core_path, const fs::path& ouis, const fs::path& dns,
                           const fs::path& aplog, const fs::path& out) {
    Stage st("classify", out, ctx);
    for (const auto& p : {core_path, ouis, dns, aplog}) st.input(p);
    st.param("admob_min_devices", std::to_string(ctx.opts.admob_min_devices));
    auto core = fuse::read_core(core_path);
    auto labels = ingest::load_oui_labels(ouis);
    const auto dns_map = ingest::load_dns_map(dns);
    std::set<MacAddress> ap_devices;
    for (const auto& e : ingest::read_ap_events(aplog)) ap_devices.insert(e.user_mac);

    const auto res = pipeline::run_classify(core, std::move(labels), dns_map, ap_devices, ctx.opts);
    const auto& cov = res.coverage;
    st.progress("{} OUIs newly labeled flute; AP coverage {:.3f}, CORE coverage {:.3f}",
                res.heuristic.newly_labeled.size(), cov.ap_fraction(), cov.core_fraction());

    ClassifyFiles r;
    r.ouis = emit(st, "ouis.csv", [&](std::ostream& o) { ingest::write_oui_labels(o, res.labels); });
    r.core = emit(st, "core.csv", [&](std::ostream& o) { fuse::write_core(o, core); });
    emit(st, "classify_report.txt", [&](std::ostream& o) {
        o << "ap_devices = " << cov.ap_devices << '\n';
        o << "ap_labeled = " << cov.ap_labeled << '\n';
        o << "ap_fraction = " << format_double(cov.ap_fraction()) << '\n';
        o << "core_devices = " << cov.core_devices << '\n';
        o << "core_labeled = " << cov.core_labeled << '\n';
        o << "core_fraction = " << format_double(cov.core_fraction()) << '\n';
        o << "flutes = " << cov.flutes << '\n';
        o << "cellos = " << cov.cellos << '\n';
        o << "flute_share = " << format_double(cov.flute_share()) << '\n';
        o << "ad_contacting_ouis = " << res.heuristic.contacting_ouis.size() << '\n';
        o << "newly_labeled_ouis = " << res.heuristic.newly_labeled.size() << '\n';
        for (const auto& oui : res.heuristic.newly_labeled) o << "# newly labeled: " << oui.str() << '\n';
    });
    st.finish();
    return r;
}

fs::path run_mobility(const Context& ctx, const fs::path& leases_path, const fs::path& buildings,
                      const std::optional<fs::path>& aplog, const std::optional<fs::path>& ouis,
                      const fs::path& out) {
    Stage st("mobility", out, ctx);
    st.input(leases_path);
    st.input(buildings);
    if (aplog) st.input(*aplog);
    if (ouis) st.input(*ouis);
    st.param("tz_offset_minutes", std::to_string(ctx.opts.tz_offset_minutes));
    st.param("ap_granularity", ctx.opts.ap_granularity ? "true" : "false");
    const int tz = ctx.opts.tz_offset_minutes;

    const auto leases = fuse::read_leases(leases_path);
    const auto registry = ingest::load_building_registry(buildings);
    const auto table = pipeline::run_mobility(leases, registry, ctx.opts);
    st.progress("{} leases, {} device-days", leases.size(), table.size());
    const auto daily = emit(st, "daily_mobility.csv", [&](std::ostream& o) { features::write_mobility_table(o, table); });

    const auto sessions = mobility::sessions_from_leases(leases);
    std::map<MacAddress, std::vector<mobility::Session>> by_device;
    for (const auto& s : sessions) by_device[s.device].push_back(s);
    std::vector<std::vector<mobility::Session>> per_device;
    for (auto& [mac, v] : by_device) per_device.push_back(std::move(v));

    std::optional<ingest::OuiLabelTable> labels;
    if (ouis) labels = ingest::load_oui_labels(*ouis);
    auto type_of = [&](const MacAddress& m) {
        return labels ? classify::classify_by_oui(m, *labels) : DeviceType::Unknown;
    };

    // Rank-frequency of building visits, per type when labels are known.
    emit(st, "zipf.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\ngroup,rank,probability,devices\n";
        std::vector<std::pair<std::string, std::vector<mobility::Session>>> groups;
        if (labels) {
            for (auto t : {DeviceType::Flute, DeviceType::Cello}) {
                std::vector<mobility::Session> v;
                for (const auto& s : sessions)
                    if (type_of(s.device) == t) v.push_back(s);
                groups.emplace_back(std::string(to_string(t)), std::move(v));
            }
        } else {
            groups.emplace_back("all", sessions);
        }
        std::string fits;
        for (const auto& [name, v] : groups) {
            const auto counts = mobility::location_visit_counts(v, ctx.opts.ap_granularity);
            const auto table = mobility::zipf_rank_table(counts);
            for (std::size_t r = 0; r < table.rank_probability.size(); ++r)
                o << name << ',' << r + 1 << ',' << format_double(table.rank_probability[r]) << ','
                  << table.rank_support[r] << '\n';
            std::string beta = "NA";
            try {
                beta = fmt_opt(mobility::zipf_rank_fit(counts).beta);
            } catch (const Error& e) {
                beta = std::string("NA (") + e.what() + ")";
            }
            fits += "# " + name + " beta = " + beta + '\n';
        }
        o << fits;
    });

    emit(st, "session_kernel.csv", [&](std::ostream& o) {
        o << text::kFormatTag << '\n';
        if (sessions.empty()) {
            o << "# no sessions\n";
            return;
        }
        const auto k = mobility::session_duration_kernel(sessions);
        o << "# sessions = " << k.count << ", five_minute_mass = " << format_double(k.five_minute_mass) << '\n';
        o << "lo_s,hi_s,mass\n";
        for (std::size_t i = 0; i < k.pdf.size(); ++i)
            o << format_double(k.edges[i]) << ',' << format_double(k.edges[i + 1]) << ',' << format_double(k.pdf[i])
              << '\n';
    });

    emit(st, "session_start.csv", [&](std::ostream& o) {
        const auto h = mobility::session_start_histogram(sessions, registry, tz);
        o << text::kFormatTag << "\ncategory,hour,pdf,sessions\n";
        for (const auto& c : h.categories)
            for (std::size_t b = 0; b < c.pdf.size(); ++b)
                o << to_string(c.category) << ',' << b << ',' << format_double(c.pdf[b]) << ',' << c.count << '\n';
        for (auto c : h.empty_categories) o << "# no sessions: " << to_string(c) << '\n';
    });

    emit(st, "visited_locations.csv", [&](std::ostream& o) {
        std::vector<std::vector<std::size_t>> curves;
        for (const auto& v : per_device) curves.push_back(mobility::visited_locations_curve(v, tz));
        const auto agg = mobility::aggregate_visited_curves(curves);
        o << text::kFormatTag << "\nday,mean,median\n";
        for (std::size_t d = 0; d < agg.mean.size(); ++d)
            o << d + 1 << ',' << format_double(agg.mean[d]) << ',' << format_double(agg.median[d]) << '\n';
        for (auto d : mobility::detect_slope_changes(agg.mean)) o << "# slope change at day " << d + 1 << '\n';
    });

    emit(st, "return_probability.csv", [&](std::ostream& o) {
        const auto p = mobility::return_probability(per_device);
        o << text::kFormatTag << "\nlag_hours,probability\n";
        for (std::size_t h = 0; h < p.size(); ++h) o << h << ',' << format_double(p[h]) << '\n';
    });

    emit(st, "passby.csv", [&](std::ostream& o) {
        const auto pb = mobility::detect_passby_aps(per_device);
        o << text::kFormatTag << "\ndevice,passby_windows,sessions,score\n";
        for (const auto& [mac, score] : pb.score)
            o << mac.str() << ',' << pb.passby_count.at(mac) << ',' << pb.total_sessions.at(mac) << ','
              << format_double(score) << '\n';
    });

    if (aplog && labels) {
        const auto events = ingest::read_ap_events(*aplog);
        const auto hc = mobility::hourly_association_curves(events, type_of, tz);
        emit(st, "hourly.csv", [&](std::ostream& o) {
            o << text::kFormatTag << "\nhour,flute_fraction,cello_fraction,stay_difference\n";
            for (std::size_t h = 0; h < 24; ++h)
                o << h << ',' << format_double(hc.flute_fraction[h]) << ',' << format_double(hc.cello_fraction[h])
                  << ',' << hc.stay_difference[h] << '\n';
        });
    }
    st.finish();
    return daily;
}

fs::path run_traffic(const Context& ctx, const fs::path& core_path, const fs::path& out) {
    Stage st("traffic", out, ctx);
    st.input(core_path);
    st.param("tz_offset_minutes", std::to_string(ctx.opts.tz_offset_minutes));
    const int tz = ctx.opts.tz_offset_minutes;
    const auto core = fuse::read_core(core_path);
    const auto table = pipeline::run_traffic(core, ctx.opts);
    st.progress("{} CORE rows, {} device-days", core.size(), table.size());
    const auto daily = emit(st, "daily_traffic.csv", [&](std::ostream& o) { features::write_traffic_table(o, table); });

    emit(st, "flow_stats.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\ntype,day_class,metric,n,mean,median,std,iqr_removed\n";
        for (const auto& [key, fsx] : traffic::flow_level_stats_by_group(core, tz)) {
            const std::pair<const char*, const traffic::Summary*> metrics[] = {
                {"bytes", &fsx.bytes}, {"packet_size", &fsx.packet_size}, {"packets", &fsx.packets},
                {"runtime_ms", &fsx.runtime_ms}};
            for (std::size_t i = 0; i < 4; ++i) {
                const auto& s = *metrics[i].second;
                o << to_string(key.type) << ',' << day_class(key.weekend) << ',' << metrics[i].first << ',' << s.n
                  << ',' << format_double(s.mean) << ',' << format_double(s.median) << ',' << format_double(s.std)
                  << ',' << fsx.removed[i] << '\n';
            }
        }
    });

    emit(st, "ap_iat.csv", [&](std::ostream& o) {
        const auto iat = traffic::iat_per_ap(core, tz);
        o << text::kFormatTag << "\n# streams = " << iat.streams << ", skipped = " << iat.skipped_streams << '\n';
        o << "type,n,mean_ms,median_ms,std_ms,p90_ms,p99_ms\n";
        for (const auto& [type, xs] : iat.samples) {
            if (xs.empty()) continue;
            const auto s = traffic::summarize(xs);
            o << to_string(type) << ',' << s.n << ',' << format_double(s.mean) << ',' << format_double(s.median)
              << ',' << format_double(s.std) << ',' << format_double(traffic::quantile(xs, 0.9)) << ','
              << format_double(traffic::quantile(xs, 0.99)) << '\n';
        }
    });

    emit(st, "protocols.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\ntype,protocol,flow_share,byte_share,flows\n";
        for (auto t : {DeviceType::Flute, DeviceType::Cello, DeviceType::Unknown}) {
            std::vector<CoreFlow> sub;
            for (const auto& c : core)
                if (c.device_type == t) sub.push_back(c);
            const auto ps = traffic::protocol_split(sub);
            for (auto p : {Protocol::Tcp, Protocol::Udp, Protocol::Other}) {
                const auto i = static_cast<std::size_t>(p);
                o << to_string(t) << ',' << to_string(p) << ',' << format_double(ps.flow_share[i]) << ','
                  << format_double(ps.byte_share[i]) << ',' << ps.flows << '\n';
            }
        }
    });

    emit(st, "ap_load.csv", [&](std::ostream& o) {
        const auto load = traffic::ap_daily_load(core, tz);
        o << text::kFormatTag << "\ntype,day_class,zero_flow_fraction,median_daily_bytes,median_daily_packets\n";
        for (auto t : {DeviceType::Flute, DeviceType::Cello})
            for (bool we : {false, true}) {
                const auto b = load.daily_bytes(t, we);
                const auto p = load.daily_packets(t, we);
                o << to_string(t) << ',' << day_class(we) << ',' << format_double(load.zero_flow_fraction(t, we))
                  << ',' << (b.empty() ? "NA" : format_double(traffic::quantile(b, 0.5))) << ','
                  << (p.empty() ? "NA" : format_double(traffic::quantile(p, 0.5))) << '\n';
            }
    });
    st.finish();
    return daily;
}

fs::path run_features(const Context& ctx, const fs::path& mobility_path, const fs::path& traffic_path,
                      const fs::path& out) {
    Stage st("features", out, ctx);
    st.input(mobility_path);
    st.input(traffic_path);
    const auto mob = features::read_mobility_table(mobility_path);
    const auto tra = features::read_traffic_table(traffic_path);
    const auto rows = features::join(mob, tra);
    st.progress("{} mobility rows, {} traffic rows, {} joined", mob.size(), tra.size(), rows.size());
    const auto table = emit(st, "features.csv", [&](std::ostream& o) { features::write_table(o, rows); });

    emit(st, "ratios.csv", [&](std::ostream& o) {
        o << text::kFormatTag
          << "\nmetric,day_class,flute_n,cello_n,flute_mean,cello_mean,ratio_mean,flute_median,cello_median,"
             "mann_whitney_p\n";
        for (const auto& r : pipeline::type_ratios(rows)) {
            std::vector<double> f, c;
            for (const auto& row : rows) {
                if (row.weekend() != r.weekend) continue;
                if (row.type == DeviceType::Flute) f.push_back(features::value(row, r.metric));
                if (row.type == DeviceType::Cello) c.push_back(features::value(row, r.metric));
            }
            auto med = [](const std::vector<double>& v) {
                return v.empty() ? std::string("NA") : format_double(traffic::quantile(v, 0.5));
            };
            const std::string p = f.empty() || c.empty() ? "NA" : format_double(stats::mann_whitney_u(f, c).p);
            o << r.metric << ',' << day_class(r.weekend) << ',' << r.flute_n << ',' << r.cello_n << ','
              << format_double(r.flute_mean) << ',' << format_double(r.cello_mean) << ','
              << (r.flute_mean != 0 ? format_double(r.ratio()) : "NA") << ',' << med(f) << ',' << med(c) << ','
              << p << '\n';
        }
    });
    st.finish();
    return table;
}

void run_correlate(const Context& ctx, const fs::path& features_path, const fs::path& out) {
    Stage st("correlate", out, ctx);
    const auto rows = load_features(st, features_path);
    const auto names = features::all_names();

    emit(st, "correlation.csv", [&](std::ostream& o) {
        o << text::kFormatTag << '\n';
        o << "# layout: each (a, b) cell is split in four quadrants: flute/weekday top-left, flute/weekend "
             "top-right, cello/weekday bottom-left, cello/weekend bottom-right\n";
        o << "type,day_class,quadrant,a,b,r,n\n";
        for (auto t : {DeviceType::Flute, DeviceType::Cello})
            for (bool we : {false, true}) {
                std::vector<features::FeatureRow> sub;
                for (const auto& r : rows)
                    if (r.type == t && r.weekend() == we) sub.push_back(r);
                const char* quadrant = t == DeviceType::Flute ? (we ? "top-right" : "top-left")
                                                               : (we ? "bottom-right" : "bottom-left");
                if (sub.size() < 3) {
                    o << "# " << to_string(t) << '/' << day_class(we) << ": too few rows\n";
                    continue;
                }
                const auto cm = stats::pearson_matrix(features::matrix(sub, names), names);
                for (std::size_t i = 0; i < names.size(); ++i) {
                    if (cm.constant[i]) o << "# constant column " << names[i] << " in " << to_string(t) << '/'
                                          << day_class(we) << '\n';
                    for (std::size_t j = 0; j < names.size(); ++j) {
                        const double r = cm.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                        o << to_string(t) << ',' << day_class(we) << ',' << quadrant << ',' << names[i] << ','
                          << names[j] << ',' << (std::isnan(r) ? "NA" : format_double(r)) << ',' << sub.size()
                          << '\n';
                    }
                }
            }
    });

    emit(st, "cfs.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\nset,merit,selected,dropped_constant\n";
        for (auto set : {features::FeatureSet::Mobility, features::FeatureSet::Traffic, features::FeatureSet::Combined}) {
            const auto data = features::make_dataset(rows, set);
            if (data.y.empty()) continue;
            std::vector<int> labels;
            for (int y : data.y) labels.push_back(y > 0 ? 1 : 0);
            const auto res = stats::cfs_select(data.x, labels);
            std::string sel, dropped;
            for (auto i : res.selected) sel += (sel.empty() ? "" : " ") + data.names[i];
            for (auto i : res.dropped_constant) dropped += (dropped.empty() ? "" : " ") + data.names[i];
            if (!res.dropped_constant.empty())
                st.progress("warning: constant features dropped before CFS ({}): {}", to_string(set), dropped);
            o << to_string(set) << ',' << format_double(res.merit) << ',' << sel << ',' << dropped << '\n';
        }
    });
    st.finish();
}

void run_fit(const Context& ctx, const fs::path& features_path, const std::optional<fs::path>& core_path,
             const fs::path& out) {
    Stage st("fit", out, ctx);
    const auto rows = load_features(st, features_path);
    std::vector<CoreFlow> core;
    if (core_path) {
        st.input(*core_path);
        core = fuse::read_core(*core_path);
    }
    const auto fits = pipeline::fit_distributions(core, rows, ctx.opts);
    st.progress("{} samples fitted", fits.size());
    emit(st, "fits.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\nsample,n,rank,family,params,ks,ks_p,log_likelihood,accepted,converged,beta_scale\n";
        for (const auto& row : fits) {
            if (!row.not_fitted.empty()) o << "# " << row.sample << ": not fitted: " << row.not_fitted << '\n';
            int rank = 0;
            for (const auto& f : row.ranking.fits) {
                std::string params;
                const auto pn = stats::parameter_names(f.family);
                for (std::size_t i = 0; i < f.params.size(); ++i)
                    params += fmt::format("{}{}={}", i ? " " : "", pn[i], format_double(f.params[i]));
                const std::string scale = f.scaling.applied ? fmt::format("offset={} scale={}",
                                                                          format_double(f.scaling.offset),
                                                                          format_double(f.scaling.scale))
                                                            : "";
                o << row.sample << ',' << f.n << ',' << ++rank << ',' << stats::to_string(f.family) << ',' << params
                  << ',' << format_double(f.ks) << ',' << format_double(f.ks_p) << ','
                  << format_double(f.log_likelihood) << ',' << (f.accepted() ? "yes" : "no") << ','
                  << (f.converged ? "yes" : "no") << ',' << scale << '\n';
            }
            for (const auto& [family, why] : row.ranking.skipped)
                o << "# " << row.sample << ": " << stats::to_string(family) << " skipped: " << why << '\n';
        }
    });
    st.finish();
}

void run_model_svm(const Context& ctx, const fs::path& features_path, std::vector<features::FeatureSet> sets,
                   const fs::path& out) {
    Stage st("model-svm", out, ctx);
    const auto rows = load_features(st, features_path);
    st.param("folds", std::to_string(ctx.opts.cv_folds));
    st.param("lambda", format_double(ctx.opts.svm.lambda));
    st.param("epochs", std::to_string(ctx.opts.svm.epochs));
    sets = or_all(std::move(sets));
    std::vector<learn::CvResult> res(sets.size());
    pipeline::parallel_for(sets.size(), ctx.opts.threads,
                           [&](std::size_t i) { res[i] = pipeline::evaluate_svm(rows, sets[i], ctx.opts); });
    emit(st, "svm.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\nset,accuracy,fold_accuracy\n";
        for (std::size_t i = 0; i < sets.size(); ++i) {
            std::string folds;
            for (double a : res[i].fold_accuracy) folds += (folds.empty() ? "" : " ") + format_double(a);
            o << to_string(sets[i]) << ',' << format_double(res[i].accuracy) << ',' << folds << '\n';
            st.progress("{}: accuracy {:.4f}", to_string(sets[i]), res[i].accuracy);
        }
    });
    st.finish();
}

void run_model_kmeans(const Context& ctx, const fs::path& features_path, std::vector<features::FeatureSet> sets,
                      const fs::path& out) {
    Stage st("model-kmeans", out, ctx);
    const auto rows = load_features(st, features_path);
    st.param("restarts", std::to_string(ctx.opts.kmeans_restarts));
    sets = or_all(std::move(sets));
    constexpr int kMaxK = 6;
    // Index s * (kMaxK - 1) + (k - 2).
    std::vector<pipeline::ClusterScores> res(sets.size() * (kMaxK - 1));
    pipeline::parallel_for(res.size(), ctx.opts.threads, [&](std::size_t i) {
        const auto set = sets[i / (kMaxK - 1)];
        const int k = 2 + static_cast<int>(i % (kMaxK - 1));
        res[i] = pipeline::evaluate_kmeans(rows, set, k, ctx.opts, true);
    });
    emit(st, "kmeans.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\nset,k,purity,silhouette,inertia\n";
        for (std::size_t s = 0; s < sets.size(); ++s) {
            int best_k = 0;
            double best_sil = -2;
            for (int k = 2; k <= kMaxK; ++k) {
                const auto& r = res[s * (kMaxK - 1) + static_cast<std::size_t>(k - 2)];
                o << to_string(sets[s]) << ',' << k << ',' << format_double(r.purity) << ','
                  << fmt_opt(r.silhouette) << ',' << format_double(r.inertia) << '\n';
                if (r.silhouette && *r.silhouette > best_sil) {
                    best_sil = *r.silhouette;
                    best_k = k;
                }
            }
            o << "# " << to_string(sets[s]) << ": best silhouette at k = " << best_k << '\n';
            st.progress("{}: purity(k=2) {:.4f}, best silhouette k = {}", to_string(sets[s]), res[s * (kMaxK - 1)].purity,
                        best_k);
        }
    });
    st.finish();
}

GmmFiles run_model_gmm(const Context& ctx, const fs::path& features_path, const fs::path& out) {
    Stage st("model-gmm", out, ctx);
    const auto rows = load_features(st, features_path);
    st.param("k_max", std::to_string(ctx.opts.gmm_k_max));
    st.param("restarts", std::to_string(ctx.opts.gmm.restarts));
    const auto combined = pipeline::train_type_models(rows, features::all_names(), ctx.opts);
    st.progress("combined models trained");
    const auto traffic_only = pipeline::train_type_models(rows, features::traffic_names(), ctx.opts);
    st.progress("traffic-only models trained");

    GmmFiles r;
    auto save = [&](const std::string& file, const std::map<DeviceType, learn::GmmSelection>& m, DeviceType t) {
        auto it = m.find(t);
        if (it == m.end()) throw Error(Errc::EmptyInput, fmt::format("no {} rows to train a model on", to_string(t)));
        return emit(st, file, [&](std::ostream& o) { learn::save_gmm(it->second.best.model, o); });
    };
    r.combined_flute = save("gmm_combined_flute.txt", combined, DeviceType::Flute);
    r.combined_cello = save("gmm_combined_cello.txt", combined, DeviceType::Cello);
    r.traffic_flute = save("gmm_traffic_flute.txt", traffic_only, DeviceType::Flute);
    r.traffic_cello = save("gmm_traffic_cello.txt", traffic_only, DeviceType::Cello);
    emit(st, "gmm_bic.csv", [&](std::ostream& o) {
        o << text::kFormatTag << "\nmodel,type,k,bic,chosen\n";
        for (const auto& [name, m] : {std::pair{"combined", &combined}, std::pair{"traffic", &traffic_only}})
            for (const auto& [type, sel] : *m)
                for (const auto& [k, bic] : sel.bic)
                    o << name << ',' << to_string(type) << ',' << k << ',' << format_double(bic) << ','
                      << (k == sel.best.model.components() ? "yes" : "no") << '\n';
    });
    st.finish();
    return r;
}

void run_synth(const Context& ctx, const SynthInputs& in, const fs::path& out) {
    Stage st("synth", out, ctx);
    std::map<DeviceType, learn::GmmModel> combined;
    st.input(in.flute_model);
    st.input(in.cello_model);
    combined.emplace(DeviceType::Flute, learn::load_gmm(in.flute_model.string()));
    combined.emplace(DeviceType::Cello, learn::load_gmm(in.cello_model.string()));

    std::vector<features::FeatureRow> real;
    if (in.features) real = load_features(st, *in.features);
    std::size_t n = ctx.synth_rows;
    if (n == 0) {
        for (auto t : {DeviceType::Flute, DeviceType::Cello}) {
            const auto c = static_cast<std::size_t>(
                std::count_if(real.begin(), real.end(), [&](const auto& r) { return r.type == t; }));
            n = std::max(n, c);
        }
        if (n == 0) n = 1000;
    }
    st.param("rows_per_type", std::to_string(n));
    const auto rows = synth::synthesize_features(combined, n, ctx.opts.seed);
    emit(st, "synthetic_features.csv", [&](std::ostream& o) {
        o << "# synthetic rows carry a zero device and day\n";
        features::write_table(o, rows);
    });
    st.progress("{} synthetic rows", rows.size());

    if (!real.empty()) {
        const auto traffic = features::traffic_names();
        const auto all = features::all_names();
        std::vector<std::pair<std::string, std::vector<pipeline::TypeSynthesis>>> reports;
        reports.emplace_back("combined", pipeline::validate_models(combined, real, all, ctx.opts.seed));
        reports.emplace_back("combined-traffic", pipeline::validate_models(combined, real, traffic, ctx.opts.seed));
        if (in.traffic_flute_model && in.traffic_cello_model) {
            std::map<DeviceType, learn::GmmModel> tm;
            st.input(*in.traffic_flute_model);
            st.input(*in.traffic_cello_model);
            tm.emplace(DeviceType::Flute, learn::load_gmm(in.traffic_flute_model->string()));
            tm.emplace(DeviceType::Cello, learn::load_gmm(in.traffic_cello_model->string()));
            reports.emplace_back("traffic-only", pipeline::validate_models(tm, real, traffic, ctx.opts.seed));
        }
        emit(st, "synth_ks.csv", [&](std::ostream& o) {
            o << text::kFormatTag << "\nmodel,type,feature,ks,p\n";
            for (const auto& [name, rep] : reports)
                for (const auto& t : rep)
                    for (const auto& f : t.report.features)
                        o << name << ',' << to_string(t.type) << ',' << f.name << ',' << format_double(f.ks) << ','
                          << format_double(f.p) << '\n';
        });
        emit(st, "synth_report.txt", [&](std::ostream& o) {
            o << "# average, min, max, std of per-feature KS against the real rows\n";
            for (const auto& [name, rep] : reports) {
                for (const auto& t : rep)
                    o << name << '.' << to_string(t.type) << " = " << format_double(t.report.average) << ' '
                      << format_double(t.report.min) << ' ' << format_double(t.report.max) << ' '
                      << format_double(t.report.std) << '\n';
                o << name << ".average = " << format_double(pipeline::average_ks(rep)) << '\n';
                st.progress("{}: average KS {:.4f}", name, pipeline::average_ks(rep));
            }
        });
    }
    st.finish();
}

void run_pipeline(const Context& ctx, const std::optional<fs::path>& spec_file,
                  const std::optional<TraceInputs>& traces, const fs::path& out) {
    if (!spec_file && !traces) throw UsageError("pipeline needs --spec or the five trace inputs");
    Stage top("pipeline", out, ctx);
    TraceInputs raw;
    if (spec_file) {
        raw = run_testgen(ctx, spec_file, out / "testgen").files;
    } else {
        raw = *traces;
    }
    for (const auto& p : {raw.aplog, raw.netflow, raw.buildings, raw.ouis, raw.dns}) top.input(p);
    const auto ingested = run_ingest(ctx, raw, out / "ingest");
    const auto fused = run_fuse(ctx, ingested, out / "fuse");
    const auto classified =
        run_classify(ctx, fused.core, ingested.ouis, ingested.dns, ingested.aplog, out / "classify");
    const auto mob =
        run_mobility(ctx, fused.leases, ingested.buildings, ingested.aplog, classified.ouis, out / "mobility");
    const auto tra = run_traffic(ctx, classified.core, out / "traffic");
    const auto feats = run_features(ctx, mob, tra, out / "features");
    run_correlate(ctx, feats, out / "correlate");
    run_fit(ctx, feats, classified.core, out / "fit");
    run_model_svm(ctx, feats, {}, out / "model" / "svm");
    run_model_kmeans(ctx, feats, {}, out / "model" / "kmeans");
    const auto gmm = run_model_gmm(ctx, feats, out / "model" / "gmm");
    SynthInputs si{gmm.combined_flute, gmm.combined_cello, feats, gmm.traffic_flute, gmm.traffic_cello};
    run_synth(ctx, si, out / "synth");
    for (const char* stage : {"testgen", "ingest", "fuse", "classify", "mobility", "traffic", "features", "correlate",
                              "fit", "model/svm", "model/kmeans", "model/gmm", "synth"})
        if (fs::exists(out / stage / "manifest.txt")) top.output(std::string(stage) + "/manifest.txt");
    top.finish();
}

}  // namespace flames::cli
