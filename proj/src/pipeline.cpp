#include "flames/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include <fmt/format.h>

#include "flames/error.hpp"
#include "flames/synth.hpp"

namespace flames::pipeline {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

FuseOutput run_fuse(std::vector<ApEvent> events, std::span<const FlowRecord> flows,
                    const ingest::BuildingRegistry& registry, const ingest::OuiLabelTable& labels,
                    const Options& opts) {
    FuseOutput out;
    ingest::ApNameResolver resolver(&registry);
    fuse::LeaseOptions lo;
    lo.max_gap = opts.lease_max_gap;
    out.leases = fuse::derive_all_leases(std::move(events), std::ref(resolver), lo);
    fuse::LeaseIndex index(out.leases.leases);
    out.core = fuse::match_flows(flows, index, &out.stats,
                                 [&](const MacAddress& m) { return classify::classify_by_oui(m, labels); });
    fuse::sort_core(out.core);
    return out;
}

ClassifyOutput run_classify(std::vector<CoreFlow>& core, ingest::OuiLabelTable labels, const ingest::DnsMap& dns,
                            const std::set<MacAddress>& ap_devices, const Options& opts) {
    ClassifyOutput out;
    classify::AdHeuristicOptions ho;
    ho.min_devices = opts.admob_min_devices;
    out.heuristic = classify::admob_heuristic(core, dns, labels, ho);
    classify::relabel(core, labels);
    std::set<MacAddress> core_devices;
    for (const auto& c : core) core_devices.insert(c.device_mac);
    out.coverage = classify::classification_report(labels, ap_devices, core_devices);
    out.labels = std::move(labels);
    return out;
}

std::vector<mobility::DailyMobilityRow> run_mobility(std::span<const Lease> leases,
                                                     const ingest::BuildingRegistry& registry, const Options& opts) {
    const auto sessions = mobility::sessions_from_leases(leases);
    mobility::MobilityOptions mo;
    mo.tz_offset_minutes = opts.tz_offset_minutes;
    mo.ap_granularity = opts.ap_granularity;
    return mobility::daily_mobility_table(sessions, registry, mo);
}

std::vector<traffic::DailyTrafficRow> run_traffic(std::span<const CoreFlow> core, const Options& opts) {
    traffic::TrafficOptions to;
    to.tz_offset_minutes = opts.tz_offset_minutes;
    return traffic::daily_traffic_table(core, to);
}

std::vector<RatioRow> type_ratios(std::span<const features::FeatureRow> rows) {
    std::vector<RatioRow> out;
    for (const auto& name : features::all_names()) {
        for (bool weekend : {false, true}) {
            RatioRow r;
            r.metric = name;
            r.weekend = weekend;
            double fs = 0, cs = 0;
            for (const auto& row : rows) {
                if (row.weekend() != weekend) continue;
                const double v = features::value(row, name);
                if (row.type == DeviceType::Flute) {
                    fs += v;
                    ++r.flute_n;
                } else if (row.type == DeviceType::Cello) {
                    cs += v;
                    ++r.cello_n;
                }
            }
            r.flute_mean = r.flute_n ? fs / static_cast<double>(r.flute_n) : 0.0;
            r.cello_mean = r.cello_n ? cs / static_cast<double>(r.cello_n) : 0.0;
            out.push_back(r);
        }
    }
    return out;
}

learn::CvResult evaluate_svm(std::span<const features::FeatureRow> rows, features::FeatureSet set,
                             const Options& opts) {
    const auto data = features::make_dataset(rows, set);
    learn::SvmOptions so = opts.svm;
    so.seed = opts.seed;
    return learn::cross_validate_svm(data.x, data.y, opts.cv_folds, so, learn::heavy_tail_transforms(data.x));
}

ClusterScores evaluate_kmeans(std::span<const features::FeatureRow> rows, features::FeatureSet set, int k,
                              const Options& opts, bool with_silhouette) {
    const auto data = features::make_dataset(rows, set);
    const auto z = learn::Preprocessor::fit(data.x, learn::heavy_tail_transforms(data.x)).apply(data.x);
    std::uint64_t stream = opts.seed;
    learn::KMeansResult best;
    for (int r = 0; r < std::max(1, opts.kmeans_restarts); ++r) {
        learn::KMeansOptions ko;
        ko.seed = synth::splitmix64(stream);
        auto km = learn::kmeans(z, k, ko);
        if (r == 0 || km.inertia < best.inertia) best = std::move(km);
    }
    ClusterScores s;
    s.k = k;
    s.purity = learn::purity(best.assignment, data.y);
    s.inertia = best.inertia;
    if (with_silhouette) s.silhouette = learn::silhouette(z, best.assignment);
    return s;
}

ModelScores evaluate_feature_set(std::span<const features::FeatureRow> rows, features::FeatureSet set,
                                 const Options& opts) {
    ModelScores s;
    s.set = set;
    const auto cv = evaluate_svm(rows, set, opts);
    s.svm_accuracy = cv.accuracy;
    s.fold_accuracy = cv.fold_accuracy;
    const auto km = evaluate_kmeans(rows, set, 2, opts);
    s.kmeans_purity = km.purity;
    return s;
}

std::map<DeviceType, learn::GmmSelection> train_type_models(std::span<const features::FeatureRow> rows,
                                                            const std::vector<std::string>& names,
                                                            const Options& opts) {
    const DeviceType types[] = {DeviceType::Flute, DeviceType::Cello};
    std::vector<std::optional<learn::GmmSelection>> fits(2);
    parallel_for(2, opts.threads, [&](std::size_t i) {
        std::vector<features::FeatureRow> own;
        for (const auto& r : rows)
            if (r.type == types[i]) own.push_back(r);
        if (own.empty()) return;
        const auto x = features::matrix(own, names);
        const auto prep = learn::Preprocessor::fit(x, learn::heavy_tail_transforms(x));
        learn::GmmOptions go = opts.gmm;
        go.seed = opts.seed + i;
        const int kmax = std::min<int>(opts.gmm_k_max, static_cast<int>(own.size()));
        fits[i] = learn::select_gmm(x, kmax, prep, names, go);
    });
    std::map<DeviceType, learn::GmmSelection> out;
    for (std::size_t i = 0; i < 2; ++i)
        if (fits[i]) out.emplace(types[i], std::move(*fits[i]));
    return out;
}

std::map<DeviceType, learn::GmmModel> best_models(const std::map<DeviceType, learn::GmmSelection>& fits) {
    std::map<DeviceType, learn::GmmModel> out;
    for (const auto& [type, sel] : fits) out.emplace(type, sel.best.model);
    return out;
}

std::vector<TypeSynthesis> validate_models(const std::map<DeviceType, learn::GmmModel>& models,
                                           std::span<const features::FeatureRow> rows,
                                           const std::vector<std::string>& compare, std::uint64_t seed) {
    std::vector<TypeSynthesis> out;
    std::uint64_t stream = seed;
    for (const auto& [type, model] : models) {
        std::vector<features::FeatureRow> own;
        for (const auto& r : rows)
            if (r.type == type) own.push_back(r);
        const auto& names = model.feature_names;
        std::vector<Eigen::Index> cols;
        for (const auto& c : compare) {
            auto it = std::find(names.begin(), names.end(), c);
            if (it == names.end())
                throw Error(Errc::ModelFeatureMismatch, "model lacks feature '" + c + "'");
            cols.push_back(it - names.begin());
        }
        const Eigen::MatrixXd sampled = model.sample(own.size(), synth::splitmix64(stream));
        Eigen::MatrixXd synthetic(sampled.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) synthetic.col(static_cast<Eigen::Index>(j)) = sampled.col(cols[j]);
        TypeSynthesis t;
        t.type = type;
        t.real_rows = own.size();
        t.report = learn::compare_features(features::matrix(own, compare), synthetic, compare);
        out.push_back(std::move(t));
    }
    return out;
}

double average_ks(const std::vector<TypeSynthesis>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (const auto& t : v) s += t.report.average;
    return s / static_cast<double>(v.size());
}

namespace {

std::vector<double> thin(std::vector<double> xs, std::size_t max_samples) {
    if (xs.size() <= max_samples || max_samples == 0) return xs;
    std::vector<double> out;
    const double stride = static_cast<double>(xs.size()) / static_cast<double>(max_samples);
    for (std::size_t i = 0; i < max_samples; ++i) out.push_back(xs[static_cast<std::size_t>(i * stride)]);
    return out;
}

}  // namespace

std::vector<FitRow> fit_distributions(std::span<const CoreFlow> core, std::span<const features::FeatureRow> rows,
                                      const Options& opts, std::size_t max_samples) {
    std::vector<std::pair<std::string, std::vector<double>>> samples;
    for (auto type : {DeviceType::Flute, DeviceType::Cello}) {
        std::vector<double> bytes;
        for (const auto& c : core)
            if (c.device_type == type) bytes.push_back(static_cast<double>(c.flow.flow_bytes));
        samples.emplace_back(fmt::format("flow_bytes/{}", to_string(type)), std::move(bytes));
    }
    auto iat = traffic::iat_per_ap(core, opts.tz_offset_minutes);
    for (auto type : {DeviceType::Flute, DeviceType::Cello})
        samples.emplace_back(fmt::format("ap_iat_ms/{}", to_string(type)), std::move(iat.samples[type]));
    for (const auto& name : features::all_names())
        for (auto type : {DeviceType::Flute, DeviceType::Cello})
            for (bool weekend : {false, true}) {
                std::vector<double> xs;
                for (const auto& r : rows)
                    if (r.type == type && r.weekend() == weekend) xs.push_back(features::value(r, name));
                samples.emplace_back(
                    fmt::format("{}/{}/{}", name, to_string(type), weekend ? "weekend" : "weekday"), std::move(xs));
            }

    std::vector<FitRow> out(samples.size());
    parallel_for(samples.size(), opts.threads, [&](std::size_t i) {
        out[i].sample = samples[i].first;
        try {
            out[i].ranking = stats::select_best_fit(thin(std::move(samples[i].second), max_samples));
        } catch (const Error& e) {
            if (e.code() != Errc::TooFewSamples) throw;
            out[i].not_fitted = e.what();
        }
    });
    return out;
}

}  // namespace flames::pipeline
