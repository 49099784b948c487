#pragma once

// Maximum-likelihood fitting of seven univariate families, ranked by KS
// statistic then log-likelihood.

#include <span>
#include <string_view>
#include <vector>

namespace flames::stats {

enum class Family { Gaussian, Exponential, Gamma, Weibull, Logistic, Beta, Lognormal };

inline constexpr Family kAllFamilies[] = {Family::Gaussian, Family::Exponential, Family::Gamma, Family::Weibull,
                                          Family::Logistic, Family::Beta,        Family::Lognormal};

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

// Parameter order per family:
//   Gaussian (mu, sigma)     Exponential (rate)     Gamma (shape, scale)
//   Weibull (shape, scale)   Logistic (mu, s)       Beta (alpha, beta)
//   Lognormal (mu, sigma)
std::vector<std::string_view> parameter_names(Family f);

double log_pdf(Family f, std::span<const double> params, double x);
double cdf(Family f, std::span<const double> params, double x);
double log_likelihood(Family f, std::span<const double> params, std::span<const double> xs);
// Analytic gradient of the summed log-likelihood.
std::vector<double> score(Family f, std::span<const double> params, std::span<const double> xs);

// Affine map applied before a Beta fit: u = (x - offset) / scale, clamped
// into (eps, 1 - eps). Identity when the data already lie inside (0, 1).
struct BetaScaling {
    double offset = 0;
    double scale = 1;
    bool applied = false;
    double apply(double x) const;
};

BetaScaling beta_scaling_for(std::span<const double> xs);

struct FitResult {
    Family family = Family::Gaussian;
    std::vector<double> params;
    double log_likelihood = 0;
    double ks = 0;
    double ks_p = 0;
    std::size_t n = 0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0;  // per-sample score norm at the estimate
    BetaScaling scaling;
    // KS p >= alpha: the family is not rejected.
    bool accepted(double alpha = 0.05) const { return ks_p >= alpha; }
};

struct FitOptions {
    double tolerance = 1e-9;
    int max_iterations = 200;
    std::size_t min_samples = 10;
};

// Throws TooFewSamples, SupportViolation (negative or zero data for a
// positive-support family) or NonConvergence.
FitResult fit_mle(Family f, std::span<const double> xs, const FitOptions& opts = {});

struct FitRanking {
    std::vector<FitResult> fits;  // best first
    // Families that could not be fitted, with the reason.
    std::vector<std::pair<Family, std::string>> skipped;
};

FitRanking select_best_fit(std::span<const double> xs, std::span<const Family> families = kAllFamilies,
                           const FitOptions& opts = {});

}  // namespace flames::stats
