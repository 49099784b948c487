#pragma once

// Descriptive statistics, robust filtering, rank tests, KS statistics,
// Pearson correlation and correlation-based feature selection.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flames::stats {

std::vector<double> sorted_copy(std::span<const double> xs);
// Linear interpolation between order statistics (the common "type 7" rule).
double quantile_sorted(std::span<const double> sorted, double q);

struct IqrResult {
    std::vector<double> retained;
    std::size_t removed = 0;
    double lower = 0;
    double upper = 0;
};

// Keeps Q1 - k*IQR <= x <= Q3 + k*IQR, input order preserved.
IqrResult iqr_filter(std::span<const double> xs, double k = 1.5);

struct Moments {
    std::size_t n = 0;
    double mean = 0;
    double std = 0;  // n - 1 denominator
    double skewness = 0;
    double excess_kurtosis = 0;
    // Zero variance: skewness and kurtosis are NaN.
    bool degenerate = false;
};

Moments moments(std::span<const double> xs);

struct TestResult {
    double statistic = 0;
    double p = 1;
};

double normal_cdf(double z);

// Kolmogorov limiting distribution survival function Q(lambda).
double kolmogorov_q(double lambda);

// One-sample: D = sup |F_n - F|, asymptotic p.
TestResult ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);
// Two-sample D with the effective-size asymptotic p.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

// U = min(U_a, U_b); normal approximation with tie and continuity corrections.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);
// W = min(W+, W-) over non-zero paired differences; normal approximation.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Mid-ranks (1-based) with ties averaged.
std::vector<double> ranks(std::span<const double> xs);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd r;           // NaN where a column has zero variance
    std::vector<bool> constant;  // zero-variance columns
};

// Columns of `data` are features; rows with any NaN are dropped.
CorrelationMatrix pearson_matrix(const Eigen::MatrixXd& data, std::vector<std::string> names);

struct CfsResult {
    std::vector<std::size_t> selected;  // ascending column indices
    double merit = 0;
    std::vector<std::size_t> dropped_constant;
    std::size_t expansions = 0;
};

struct CfsOptions {
    std::size_t stall_limit = 5;
};

// merit = k * mean|r_cf| / sqrt(k + k(k-1) * mean|r_ff|)
double cfs_merit(std::span<const std::size_t> subset, std::span<const double> r_cf, const Eigen::MatrixXd& r_ff);

// Best-first forward search over feature subsets. `labels` are 0/1. At most
// 64 features.
CfsResult cfs_select(const Eigen::MatrixXd& data, std::span<const int> labels, const CfsOptions& opts = {});

}  // namespace flames::stats
