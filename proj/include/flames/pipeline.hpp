#pragma once

// In-memory stage composition: the CLI stages and the end-to-end pipeline
// are thin file wrappers around these.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flames/classify.hpp"
#include "flames/core.hpp"
#include "flames/features.hpp"
#include "flames/fit.hpp"
#include "flames/fuse.hpp"
#include "flames/ingest.hpp"
#include "flames/learn.hpp"
#include "flames/mobility.hpp"
#include "flames/traffic.hpp"

namespace flames::pipeline {

struct Options {
    int tz_offset_minutes = kDefaultTzOffsetMinutes;
    Millis lease_max_gap = 6 * kMsPerHour;
    bool ap_granularity = false;
    std::size_t admob_min_devices = 1;
    std::uint64_t seed = 1;
    int threads = 1;
    int cv_folds = 5;
    learn::SvmOptions svm;
    int kmeans_restarts = 10;
    int gmm_k_max = 10;
    learn::GmmOptions gmm;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written by index so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct FuseOutput {
    fuse::LeaseDerivation leases;
    std::vector<CoreFlow> core;  // canonical order
    fuse::MatchStats stats;
};

// Device types on CORE rows come from the OUI table as given.
FuseOutput run_fuse(std::vector<ApEvent> events, std::span<const FlowRecord> flows,
                    const ingest::BuildingRegistry& registry, const ingest::OuiLabelTable& labels,
                    const Options& opts = {});

struct ClassifyOutput {
    ingest::OuiLabelTable labels;
    classify::AdHeuristicResult heuristic;
    classify::CoverageReport coverage;
};

// Applies the ad-network heuristic, then relabels `core` in place.
ClassifyOutput run_classify(std::vector<CoreFlow>& core, ingest::OuiLabelTable labels, const ingest::DnsMap& dns,
                            const std::set<MacAddress>& ap_devices, const Options& opts = {});

std::vector<mobility::DailyMobilityRow> run_mobility(std::span<const Lease> leases,
                                                     const ingest::BuildingRegistry& registry,
                                                     const Options& opts = {});
std::vector<traffic::DailyTrafficRow> run_traffic(std::span<const CoreFlow> core, const Options& opts = {});

// Mean of each feature per type and day class; ratio = cello mean / flute mean.
struct RatioRow {
    std::string metric;
    bool weekend = false;
    std::size_t flute_n = 0;
    std::size_t cello_n = 0;
    double flute_mean = 0;
    double cello_mean = 0;
    double ratio() const { return flute_mean != 0 ? cello_mean / flute_mean : 0.0; }
};

std::vector<RatioRow> type_ratios(std::span<const features::FeatureRow> rows);

struct ModelScores {
    features::FeatureSet set = features::FeatureSet::Combined;
    double svm_accuracy = 0;
    std::vector<double> fold_accuracy;
    double kmeans_purity = 0;
    std::optional<double> silhouette;
};

// 5-fold SVM accuracy and 2-means purity on one feature set. Heavy-tailed
// columns are log1p-transformed and everything is z-scored.
ModelScores evaluate_feature_set(std::span<const features::FeatureRow> rows, features::FeatureSet set,
                                 const Options& opts = {});

learn::CvResult evaluate_svm(std::span<const features::FeatureRow> rows, features::FeatureSet set,
                             const Options& opts = {});

struct ClusterScores {
    int k = 2;
    double purity = 0;
    double inertia = 0;
    std::optional<double> silhouette;
};

// Lowest-inertia run out of opts.kmeans_restarts k-means++ starts.
ClusterScores evaluate_kmeans(std::span<const features::FeatureRow> rows, features::FeatureSet set, int k,
                              const Options& opts = {}, bool with_silhouette = false);

// One GMM per device type (flute, cello) over the named columns, k chosen by BIC.
std::map<DeviceType, learn::GmmSelection> train_type_models(std::span<const features::FeatureRow> rows,
                                                            const std::vector<std::string>& names,
                                                            const Options& opts = {});

std::map<DeviceType, learn::GmmModel> best_models(const std::map<DeviceType, learn::GmmSelection>& fits);

struct TypeSynthesis {
    DeviceType type = DeviceType::Unknown;
    std::size_t real_rows = 0;
    learn::SynthesisReport report;
};

// Samples as many rows as the real data holds per type and compares the
// `compare` columns, which must be a subset of each model's features.
std::vector<TypeSynthesis> validate_models(const std::map<DeviceType, learn::GmmModel>& models,
                                           std::span<const features::FeatureRow> rows,
                                           const std::vector<std::string>& compare, std::uint64_t seed);

double average_ks(const std::vector<TypeSynthesis>& v);

struct FitRow {
    std::string sample;  // e.g. "flow_bytes/flute" or "tby/cello/weekday"
    stats::FitRanking ranking;
    std::string not_fitted;  // reason when the sample was too small to fit
};

// Flow byte sizes and AP-level IATs per type, plus every daily feature per
// type and day class. Samples larger than `max_samples` are thinned with a
// fixed stride; samples that are too small are reported, not fitted.
std::vector<FitRow> fit_distributions(std::span<const CoreFlow> core, std::span<const features::FeatureRow> rows,
                                      const Options& opts = {}, std::size_t max_samples = 200000);

}  // namespace flames::pipeline
