#include "flames/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "flames/error.hpp"
#include "flames/stats.hpp"

namespace flames::stats {

namespace {

constexpr double kLn2Pi = 1.8378770664093454836;
constexpr double kBetaEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

void check_params(Family f, std::span<const double> p) {
    const std::size_t want = f == Family::Exponential ? 1 : 2;
    if (p.size() != want) throw Error(Errc::BadFormat, "wrong parameter count for " + std::string(to_string(f)));
}

}  // namespace

std::string_view to_string(Family f) {
    switch (f) {
        case Family::Gaussian: return "gaussian";
        case Family::Exponential: return "exponential";
        case Family::Gamma: return "gamma";
        case Family::Weibull: return "weibull";
        case Family::Logistic: return "logistic";
        case Family::Beta: return "beta";
        case Family::Lognormal: return "lognormal";
    }
    return "?";
}

Family family_from_string(std::string_view s) {
    for (auto f : kAllFamilies)
        if (to_string(f) == s) return f;
    throw Error(Errc::BadFormat, "unknown family '" + std::string(s) + "'");
}

std::vector<std::string_view> parameter_names(Family f) {
    switch (f) {
        case Family::Gaussian:
        case Family::Lognormal: return {"mu", "sigma"};
        case Family::Exponential: return {"rate"};
        case Family::Gamma:
        case Family::Weibull: return {"shape", "scale"};
        case Family::Logistic: return {"mu", "s"};
        case Family::Beta: return {"alpha", "beta"};
    }
    return {};
}

double log_pdf(Family f, std::span<const double> p, double x) {
    check_params(f, p);
    switch (f) {
        case Family::Gaussian: {
            const double z = (x - p[0]) / p[1];
            return -0.5 * kLn2Pi - std::log(p[1]) - 0.5 * z * z;
        }
        case Family::Exponential: return x < 0 ? -kInf : std::log(p[0]) - p[0] * x;
        case Family::Gamma:
            if (x <= 0) return -kInf;
            return (p[0] - 1) * std::log(x) - x / p[1] - std::lgamma(p[0]) - p[0] * std::log(p[1]);
        case Family::Weibull: {
            if (x <= 0) return -kInf;
            const double lr = std::log(x / p[1]);
            return std::log(p[0] / p[1]) + (p[0] - 1) * lr - std::exp(p[0] * lr);
        }
        case Family::Logistic: {
            const double z = std::abs((x - p[0]) / p[1]);
            return -z - std::log(p[1]) - 2.0 * std::log1p(std::exp(-z));
        }
        case Family::Beta:
            if (x <= 0 || x >= 1) return -kInf;
            return (p[0] - 1) * std::log(x) + (p[1] - 1) * std::log1p(-x) - std::lgamma(p[0]) - std::lgamma(p[1]) +
                   std::lgamma(p[0] + p[1]);
        case Family::Lognormal: {
            if (x <= 0) return -kInf;
            const double lx = std::log(x);
            const double z = (lx - p[0]) / p[1];
            return -lx - 0.5 * kLn2Pi - std::log(p[1]) - 0.5 * z * z;
        }
    }
    return -kInf;
}

double cdf(Family f, std::span<const double> p, double x) {
    check_params(f, p);
    switch (f) {
        case Family::Gaussian: return normal_cdf((x - p[0]) / p[1]);
        case Family::Exponential: return x <= 0 ? 0.0 : -std::expm1(-p[0] * x);
        case Family::Gamma: return x <= 0 ? 0.0 : boost::math::gamma_p(p[0], x / p[1]);
        case Family::Weibull: return x <= 0 ? 0.0 : -std::expm1(-std::pow(x / p[1], p[0]));
        case Family::Logistic: return sigmoid((x - p[0]) / p[1]);
        case Family::Beta:
            if (x <= 0) return 0.0;
            if (x >= 1) return 1.0;
            return boost::math::ibeta(p[0], p[1], x);
        case Family::Lognormal: return x <= 0 ? 0.0 : normal_cdf((std::log(x) - p[0]) / p[1]);
    }
    return 0.0;
}

double log_likelihood(Family f, std::span<const double> p, std::span<const double> xs) {
    double ll = 0;
    for (double x : xs) ll += log_pdf(f, p, x);
    return ll;
}

std::vector<double> score(Family f, std::span<const double> p, std::span<const double> xs) {
    check_params(f, p);
    std::vector<double> g(p.size(), 0.0);
    switch (f) {
        case Family::Gaussian:
        case Family::Lognormal: {
            const double s2 = p[1] * p[1];
            for (double x : xs) {
                const double d = (f == Family::Lognormal ? std::log(x) : x) - p[0];
                g[0] += d / s2;
                g[1] += -1.0 / p[1] + d * d / (s2 * p[1]);
            }
            break;
        }
        case Family::Exponential:
            for (double x : xs) g[0] += 1.0 / p[0] - x;
            break;
        case Family::Gamma: {
            const double psi = boost::math::digamma(p[0]);
            for (double x : xs) {
                g[0] += std::log(x) - psi - std::log(p[1]);
                g[1] += x / (p[1] * p[1]) - p[0] / p[1];
            }
            break;
        }
        case Family::Weibull:
            for (double x : xs) {
                const double lr = std::log(x / p[1]);
                const double t = std::exp(p[0] * lr);
                g[0] += 1.0 / p[0] + lr - t * lr;
                g[1] += (p[0] / p[1]) * (t - 1.0);
            }
            break;
        case Family::Logistic:
            for (double x : xs) {
                const double z = (x - p[0]) / p[1];
                const double u = 2.0 * sigmoid(z) - 1.0;
                g[0] += u / p[1];
                g[1] += (z * u - 1.0) / p[1];
            }
            break;
        case Family::Beta: {
            const double common = boost::math::digamma(p[0] + p[1]);
            const double pa = boost::math::digamma(p[0]), pb = boost::math::digamma(p[1]);
            for (double x : xs) {
                g[0] += std::log(x) - pa + common;
                g[1] += std::log1p(-x) - pb + common;
            }
            break;
        }
    }
    return g;
}

double BetaScaling::apply(double x) const {
    if (!applied) return x;
    return std::clamp((x - offset) / scale, kBetaEps, 1.0 - kBetaEps);
}

BetaScaling beta_scaling_for(std::span<const double> xs) {
    BetaScaling s;
    if (xs.empty()) return s;
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    if (*lo > 0 && *hi < 1) return s;
    s.applied = true;
    s.offset = std::min(0.0, *lo);
    const double width = *hi - s.offset;
    s.scale = width > 0 ? width * (1.0 + 1e-6) : 1.0;
    return s;
}

namespace {

struct Eval2 {
    double ll = 0;              // mean log-likelihood
    std::array<double, 2> g{};  // mean gradient
    std::array<double, 4> h{};  // mean Hessian, row-major
};

struct NewtonOut {
    std::array<double, 2> theta{};
    int iterations = 0;
    double grad_norm = 0;
    bool converged = false;
};

// Damped Newton ascent. `scaled_norm` maps (theta, gradient) to a
// scale-free norm used for the stopping rule.
NewtonOut newton2(std::array<double, 2> theta, const std::function<Eval2(const std::array<double, 2>&)>& eval,
                  const std::function<bool(const std::array<double, 2>&)>& valid,
                  const std::function<double(const std::array<double, 2>&, const Eval2&)>& scaled_norm,
                  const FitOptions& opts) {
    NewtonOut out;
    Eval2 e = eval(theta);
    for (int it = 0; it < opts.max_iterations; ++it) {
        out.grad_norm = scaled_norm(theta, e);
        if (out.grad_norm <= opts.tolerance) {
            out.converged = true;
            out.iterations = it;
            out.theta = theta;
            return out;
        }
        const double det = e.h[0] * e.h[3] - e.h[1] * e.h[2];
        std::array<double, 2> step{};
        if (e.h[0] < 0 && det > 0) {
            step[0] = -(e.h[3] * e.g[0] - e.h[1] * e.g[1]) / det;
            step[1] = -(-e.h[2] * e.g[0] + e.h[0] * e.g[1]) / det;
        } else {
            step[0] = e.g[0] / std::max(std::abs(e.h[0]), 1e-12);
            step[1] = e.g[1] / std::max(std::abs(e.h[3]), 1e-12);
        }
        double t = 1.0;
        bool moved = false;
        for (int half = 0; half < 60; ++half, t *= 0.5) {
            const std::array<double, 2> cand{theta[0] + t * step[0], theta[1] + t * step[1]};
            if (!valid(cand)) continue;
            const Eval2 ce = eval(cand);
            if (std::isfinite(ce.ll) && ce.ll >= e.ll - 1e-13 * (1.0 + std::abs(e.ll))) {
                theta = cand;
                e = ce;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    out.theta = theta;
    out.grad_norm = scaled_norm(theta, e);
    out.converged = out.grad_norm <= opts.tolerance;
    out.iterations = opts.max_iterations;
    return out;
}

double mean_of(std::span<const double> xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double var_of(std::span<const double> xs, double m) {
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size());
}

void require_positive(Family f, std::span<const double> xs, bool allow_zero) {
    for (double x : xs) {
        if (!std::isfinite(x) || x < 0 || (!allow_zero && x == 0))
            throw Error(Errc::SupportViolation,
                        std::string(to_string(f)) + " requires " + (allow_zero ? "non-negative" : "positive") + " data");
    }
}

[[noreturn]] void degenerate(Family f) {
    throw Error(Errc::NonConvergence, std::string(to_string(f)) + ": sample has no spread");
}

void fail_if(bool not_converged, Family f, double norm) {
    if (not_converged)
        throw Error(Errc::NonConvergence,
                    std::string(to_string(f)) + ": gradient norm " + std::to_string(norm) + " above tolerance");
}

FitResult fit_gamma(std::span<const double> xs, const FitOptions& opts) {
    FitResult r;
    const double m = mean_of(xs);
    double mlog = 0;
    for (double x : xs) mlog += std::log(x);
    mlog /= static_cast<double>(xs.size());
    const double s = std::log(m) - mlog;
    if (!(s > 0)) degenerate(Family::Gamma);
    double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    auto f = [&](double kk) { return std::log(kk) - boost::math::digamma(kk) - s; };
    double fk = f(k);
    int it = 0;
    while (std::abs(fk) > opts.tolerance && it < opts.max_iterations) {
        const double d = 1.0 / k - boost::math::trigamma(k);
        double next = k - fk / d;
        if (!(next > 0)) next = k / 2;
        k = next;
        fk = f(k);
        ++it;
    }
    fail_if(std::abs(fk) > opts.tolerance, Family::Gamma, std::abs(fk));
    r.params = {k, m / k};
    r.iterations = it;
    r.gradient_norm = std::abs(fk);
    return r;
}

FitResult fit_weibull(std::span<const double> xs, const FitOptions& opts) {
    FitResult r;
    const double n = static_cast<double>(xs.size());
    std::vector<double> ly(xs.size());
    double mlog = 0;
    for (double x : xs) mlog += std::log(x);
    mlog /= n;
    for (std::size_t i = 0; i < xs.size(); ++i) ly[i] = std::log(xs[i]) - mlog;
    const double max_ly = *std::max_element(ly.begin(), ly.end());
    const double sd = std::sqrt(var_of(ly, 0.0));
    if (!(sd > 0)) degenerate(Family::Weibull);

    // g(k) = 1/k - E_w[ln y], weights y^k; strictly decreasing in k.
    struct GW {
        double g, dg, log_mean_yk;
    };
    auto eval = [&](double k) {
        double sw = 0, swl = 0, swl2 = 0;
        for (double l : ly) {
            const double w = std::exp(k * (l - max_ly));
            sw += w;
            swl += w * l;
            swl2 += w * l * l;
        }
        const double el = swl / sw, el2 = swl2 / sw;
        return GW{1.0 / k - el, -1.0 / (k * k) - (el2 - el * el), k * max_ly + std::log(sw / n)};
    };
    double lo = 1e-3, hi = 1.0;
    while (eval(hi).g > 0 && hi < 1e6) hi *= 2;
    double k = std::clamp(1.2 / sd, lo, hi);
    GW e = eval(k);
    int it = 0;
    while (std::abs(e.g) * k > opts.tolerance && it < opts.max_iterations) {
        if (e.g > 0)
            lo = k;
        else
            hi = k;
        double next = k - e.g / e.dg;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        k = next;
        e = eval(k);
        ++it;
    }
    fail_if(std::abs(e.g) * k > opts.tolerance, Family::Weibull, std::abs(e.g) * k);
    r.params = {k, std::exp(mlog + e.log_mean_yk / k)};
    r.iterations = it;
    r.gradient_norm = std::abs(e.g) * k;
    return r;
}

FitResult fit_logistic(std::span<const double> xs, const FitOptions& opts) {
    const double m = mean_of(xs);
    const double sd = std::sqrt(var_of(xs, m));
    if (!(sd > 0)) degenerate(Family::Logistic);
    const double n = static_cast<double>(xs.size());
    auto eval = [&](const std::array<double, 2>& th) {
        Eval2 e;
        const double mu = th[0], s = th[1];
        for (double x : xs) {
            const double z = (x - mu) / s;
            const double az = std::abs(z);
            e.ll += -az - std::log(s) - 2.0 * std::log1p(std::exp(-az));
            const double sg = sigmoid(z);
            const double u = 2.0 * sg - 1.0;
            const double q = 2.0 * sg * (1.0 - sg);
            e.g[0] += u / s;
            e.g[1] += (z * u - 1.0) / s;
            e.h[0] += -q / (s * s);
            e.h[1] += -(u + z * q) / (s * s);
            e.h[3] += (1.0 - 2.0 * z * u - z * z * q) / (s * s);
        }
        e.h[2] = e.h[1];
        e.ll /= n;
        for (auto& v : e.g) v /= n;
        for (auto& v : e.h) v /= n;
        return e;
    };
    auto valid = [](const std::array<double, 2>& th) { return th[1] > 0 && std::isfinite(th[0]); };
    auto norm = [](const std::array<double, 2>& th, const Eval2& e) {
        return std::hypot(th[1] * e.g[0], th[1] * e.g[1]);
    };
    const auto out = newton2({m, sd * std::sqrt(3.0) / std::numbers::pi}, eval, valid, norm, opts);
    fail_if(!out.converged, Family::Logistic, out.grad_norm);
    FitResult r;
    r.params = {out.theta[0], out.theta[1]};
    r.iterations = out.iterations;
    r.gradient_norm = out.grad_norm;
    return r;
}

FitResult fit_beta(std::span<const double> us, const FitOptions& opts) {
    const double m = mean_of(us);
    const double v = var_of(us, m);
    if (!(v > 0)) degenerate(Family::Beta);
    const double n = static_cast<double>(us.size());
    double sl = 0, sl1 = 0;
    for (double u : us) {
        sl += std::log(u);
        sl1 += std::log1p(-u);
    }
    sl /= n;
    sl1 /= n;
    const double common = m * (1 - m) / v - 1;
    std::array<double, 2> start{1.0, 1.0};
    if (common > 0) start = {m * common, (1 - m) * common};
    auto eval = [&](const std::array<double, 2>& th) {
        Eval2 e;
        const double a = th[0], b = th[1];
        e.ll = (a - 1) * sl + (b - 1) * sl1 - std::lgamma(a) - std::lgamma(b) + std::lgamma(a + b);
        const double dab = boost::math::digamma(a + b);
        e.g = {sl - boost::math::digamma(a) + dab, sl1 - boost::math::digamma(b) + dab};
        const double tab = boost::math::trigamma(a + b);
        e.h = {tab - boost::math::trigamma(a), tab, tab, tab - boost::math::trigamma(b)};
        return e;
    };
    auto valid = [](const std::array<double, 2>& th) { return th[0] > 0 && th[1] > 0; };
    auto norm = [](const std::array<double, 2>&, const Eval2& e) { return std::hypot(e.g[0], e.g[1]); };
    const auto out = newton2(start, eval, valid, norm, opts);
    fail_if(!out.converged, Family::Beta, out.grad_norm);
    FitResult r;
    r.params = {out.theta[0], out.theta[1]};
    r.iterations = out.iterations;
    r.gradient_norm = out.grad_norm;
    return r;
}

}  // namespace

FitResult fit_mle(Family f, std::span<const double> xs, const FitOptions& opts) {
    if (xs.size() < opts.min_samples)
        throw Error(Errc::TooFewSamples, "need at least " + std::to_string(opts.min_samples) + " samples, got " +
                                             std::to_string(xs.size()));
    for (double x : xs)
        if (!std::isfinite(x)) throw Error(Errc::SupportViolation, "non-finite sample");

    FitResult r;
    std::vector<double> scaled;
    std::span<const double> data = xs;
    switch (f) {
        case Family::Gaussian: {
            const double m = mean_of(xs);
            const double sd = std::sqrt(var_of(xs, m));
            if (!(sd > 0)) degenerate(f);
            r.params = {m, sd};
            r.converged = true;
            break;
        }
        case Family::Exponential: {
            require_positive(f, xs, true);
            const double m = mean_of(xs);
            if (!(m > 0)) degenerate(f);
            r.params = {1.0 / m};
            break;
        }
        case Family::Lognormal: {
            require_positive(f, xs, false);
            std::vector<double> lx(xs.size());
            std::transform(xs.begin(), xs.end(), lx.begin(), [](double x) { return std::log(x); });
            const double m = mean_of(lx);
            const double sd = std::sqrt(var_of(lx, m));
            if (!(sd > 0)) degenerate(f);
            r.params = {m, sd};
            break;
        }
        case Family::Gamma:
            require_positive(f, xs, false);
            r = fit_gamma(xs, opts);
            break;
        case Family::Weibull:
            require_positive(f, xs, false);
            r = fit_weibull(xs, opts);
            break;
        case Family::Logistic: r = fit_logistic(xs, opts); break;
        case Family::Beta: {
            r.scaling = beta_scaling_for(xs);
            scaled.resize(xs.size());
            std::transform(xs.begin(), xs.end(), scaled.begin(), [&](double x) { return r.scaling.apply(x); });
            data = scaled;
            const auto sc = r.scaling;
            r = fit_beta(data, opts);
            r.scaling = sc;
            break;
        }
    }
    r.family = f;
    r.converged = true;
    r.n = xs.size();
    r.log_likelihood = log_likelihood(f, r.params, data);
    if (f == Family::Beta && r.scaling.applied) r.log_likelihood -= static_cast<double>(data.size()) * std::log(r.scaling.scale);
    const auto ks = ks_statistic(data, [&](double x) { return cdf(f, r.params, x); });
    r.ks = ks.statistic;
    r.ks_p = ks.p;
    return r;
}

FitRanking select_best_fit(std::span<const double> xs, std::span<const Family> families, const FitOptions& opts) {
    if (xs.size() < opts.min_samples)
        throw Error(Errc::TooFewSamples, "need at least " + std::to_string(opts.min_samples) + " samples, got " +
                                             std::to_string(xs.size()));
    FitRanking out;
    for (auto f : families) {
        try {
            out.fits.push_back(fit_mle(f, xs, opts));
        } catch (const Error& e) {
            if (e.code() != Errc::SupportViolation && e.code() != Errc::NonConvergence) throw;
            out.skipped.emplace_back(f, e.what());
        }
    }
    std::stable_sort(out.fits.begin(), out.fits.end(), [](const FitResult& a, const FitResult& b) {
        if (a.ks != b.ks) return a.ks < b.ks;
        return a.log_likelihood > b.log_likelihood;
    });
    return out;
}

}  // namespace flames::stats
