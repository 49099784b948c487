#pragma once

// Classification, clustering and generative modelling of per-device-day
// feature vectors.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flames/stats.hpp"

namespace flames::learn {

enum class Transform { Identity, Log1p };

// Per-column transform followed by z-scoring. Constant columns get scale 1.
struct Preprocessor {
    std::vector<Transform> transforms;
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Preprocessor fit(const Eigen::MatrixXd& x, std::vector<Transform> transforms = {});
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
    Eigen::Index dims() const { return mean.size(); }
};

// Log1p for columns that are non-negative with right skew above 1.
std::vector<Transform> heavy_tail_transforms(const Eigen::MatrixXd& x);

struct SvmOptions {
    double lambda = 1e-4;
    int epochs = 50;
    double eta0 = 0.5;  // initial step; schedule eta_t = eta0 / (1 + lambda * eta0 * t)
    std::uint64_t seed = 1;
};

struct LinearSvm {
    Eigen::VectorXd w;
    double b = 0;
    std::vector<double> objective;  // primal objective after each epoch

    double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return x.dot(w) + b; }
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return decision(x) >= 0 ? 1 : -1; }
};

// Hinge-loss SGD on already preprocessed rows. Labels are +1 / -1.
// Throws SingleClassInput.
LinearSvm train_svm(const Eigen::MatrixXd& x, std::span<const int> y, const SvmOptions& opts = {});

double svm_objective(const LinearSvm& m, const Eigen::MatrixXd& x, std::span<const int> y, double lambda);

// Stratified fold index per row in [0, folds).
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

struct CvResult {
    double accuracy = 0;  // pooled over all held-out rows
    std::vector<double> fold_accuracy;
};

// Raw features: each training split fits its own Preprocessor with `transforms`.
CvResult cross_validate_svm(const Eigen::MatrixXd& x, std::span<const int> y, int folds = 5,
                            const SvmOptions& opts = {}, const std::vector<Transform>& transforms = {});

struct KMeansOptions {
    int max_iterations = 300;
    double tolerance = 1e-8;  // relative inertia change
    std::uint64_t seed = 1;
};

struct KMeansResult {
    std::vector<int> assignment;
    Eigen::MatrixXd centroids;  // k x d
    double inertia = 0;
    std::vector<double> inertia_history;
    int iterations = 0;
    bool converged = false;
};

// k-means++ seeding then Lloyd iterations. Throws KExceedsN.
KMeansResult kmeans(const Eigen::MatrixXd& x, int k, const KMeansOptions& opts = {});

// Mean silhouette; nullopt when fewer than two clusters are populated.
std::optional<double> silhouette(const Eigen::MatrixXd& x, std::span<const int> assignment);
// Fraction of rows whose label is the majority label of their cluster.
double purity(std::span<const int> assignment, std::span<const int> labels);

struct GmmOptions {
    int max_iterations = 500;
    double tolerance = 1e-7;  // relative mean log-likelihood change
    double jitter = 1e-6;
    double prune_weight = 1e-6;
    std::uint64_t seed = 1;
    int restarts = 1;  // select_gmm: EM runs per k, best final likelihood kept
};

struct GmmModel {
    std::vector<std::string> feature_names;
    Preprocessor prep;
    Eigen::VectorXd weights;
    std::vector<Eigen::VectorXd> means;      // standardized space
    std::vector<Eigen::MatrixXd> covariances; // standardized space

    int components() const { return static_cast<int>(weights.size()); }
    Eigen::Index dims() const { return prep.dims(); }
    // Mean log-density of standardized rows.
    double mean_log_likelihood(const Eigen::MatrixXd& z) const;
    std::size_t parameter_count() const;
    // Rows in the original feature space.
    Eigen::MatrixXd sample(std::size_t n, std::uint64_t seed) const;
};

struct GmmFit {
    GmmModel model;
    std::vector<double> log_likelihood;  // mean per row, one entry per EM iteration
    int iterations = 0;
    bool converged = false;
    int pruned = 0;
    int jitter_events = 0;
    double bic = 0;
};

// Fits in the space given by `prep` (taken as is). Throws KExceedsN.
GmmFit fit_gmm(const Eigen::MatrixXd& x, int k, const Preprocessor& prep, std::vector<std::string> names,
               const GmmOptions& opts = {});

struct GmmSelection {
    GmmFit best;
    std::vector<std::pair<int, double>> bic;  // (k, BIC)
};

GmmSelection select_gmm(const Eigen::MatrixXd& x, int k_max, const Preprocessor& prep,
                        std::vector<std::string> names, const GmmOptions& opts = {});

inline constexpr const char* kGmmFormatTag = "flames-gmm-v1";

void save_gmm(const GmmModel& m, std::ostream& out);
GmmModel load_gmm(std::istream& in);
void save_gmm(const GmmModel& m, const std::string& path);
GmmModel load_gmm(const std::string& path);

struct FeatureKs {
    std::string name;
    double ks = 0;
    double p = 0;
};

struct SynthesisReport {
    std::vector<FeatureKs> features;
    double average = 0;
    double min = 0;
    double max = 0;
    double std = 0;
};

// Per-feature two-sample KS between real rows and synthetic rows.
SynthesisReport compare_features(const Eigen::MatrixXd& real, const Eigen::MatrixXd& synthetic,
                                 const std::vector<std::string>& names);

}  // namespace flames::learn
