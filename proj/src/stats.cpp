#include "flames/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "flames/error.hpp"

namespace flames::stats {

std::vector<double> sorted_copy(std::span<const double> xs) {
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    return v;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    q = std::clamp(q, 0.0, 1.0);
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IqrResult iqr_filter(std::span<const double> xs, double k) {
    IqrResult r;
    if (xs.empty()) return r;
    const auto s = sorted_copy(xs);
    const double q1 = quantile_sorted(s, 0.25), q3 = quantile_sorted(s, 0.75);
    r.lower = q1 - k * (q3 - q1);
    r.upper = q3 + k * (q3 - q1);
    r.retained.reserve(xs.size());
    for (double x : xs) {
        if (x >= r.lower && x <= r.upper)
            r.retained.push_back(x);
        else
            ++r.removed;
    }
    return r;
}

Moments moments(std::span<const double> xs) {
    Moments m;
    m.n = xs.size();
    if (xs.empty()) {
        m.degenerate = true;
        m.mean = m.std = m.skewness = m.excess_kurtosis = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    const double n = static_cast<double>(m.n);
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : xs) {
        const double d = x - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.std = m.n > 1 ? std::sqrt(m2 * n / (n - 1)) : 0.0;
    if (m2 <= 0) {
        m.degenerate = true;
        m.skewness = m.excess_kurtosis = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    m.skewness = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return m;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double kolmogorov_q(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0, sign = 1;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_p(double d, double n_eff) {
    const double sn = std::sqrt(n_eff);
    return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

}  // namespace

TestResult ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw Error(Errc::EmptyInput, "ks_statistic: empty sample");
    const auto s = sorted_copy(samples);
    const double n = static_cast<double>(s.size());
    double d = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = cdf(s[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return {d, ks_p(d, n)};
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error(Errc::EmptyInput, "ks_two_sample: empty sample");
    const auto x = sorted_copy(a), y = sorted_copy(b);
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return {d, ks_p(d, na * nb / (na + nb))};
}

std::vector<double> ranks(std::span<const double> xs) {
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return xs[l] < xs[r]; });
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
        i = j + 1;
    }
    return r;
}

namespace {

// sum over tie groups of t^3 - t
double tie_term(std::span<const double> values) {
    std::map<double, double> counts;
    for (double v : values) counts[v] += 1;
    double t = 0;
    for (const auto& [v, c] : counts) t += c * c * c - c;
    return t;
}

double two_sided_normal_p(double stat, double mean, double var) {
    if (var <= 0) return 1.0;
    const double z = std::max(0.0, std::abs(stat - mean) - 0.5) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error(Errc::EmptyInput, "mann_whitney_u: empty sample");
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    const auto r = ranks(all);
    const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size()), n = n1 + n2;
    const double r1 = std::accumulate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
    const double u1 = r1 - n1 * (n1 + 1) / 2.0;
    const double u = std::min(u1, n1 * n2 - u1);
    const double var = n1 * n2 / 12.0 * ((n + 1) - tie_term(all) / (n * (n - 1)));
    return {u, two_sided_normal_p(u1, n1 * n2 / 2.0, var)};
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(Errc::BadFormat, "wilcoxon_signed_rank: unpaired samples");
    std::vector<double> diff, mag;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0) continue;
        diff.push_back(d);
        mag.push_back(std::abs(d));
    }
    if (diff.empty()) return {0.0, 1.0};
    const auto r = ranks(mag);
    double wp = 0, wm = 0;
    for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? wp : wm) += r[i];
    const double n = static_cast<double>(diff.size());
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term(mag) / 48.0;
    return {std::min(wp, wm), two_sided_normal_p(wp, n * (n + 1) / 4.0, var)};
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

Eigen::MatrixXd complete_rows(const Eigen::MatrixXd& data) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        if (data.row(i).allFinite()) keep.push_back(i);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), data.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(keep[i]);
    return out;
}

}  // namespace

CorrelationMatrix pearson_matrix(const Eigen::MatrixXd& data, std::vector<std::string> names) {
    const Eigen::MatrixXd x = complete_rows(data);
    const auto p = x.cols();
    CorrelationMatrix cm;
    cm.names = std::move(names);
    cm.r = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
    cm.constant.assign(static_cast<std::size_t>(p), false);
    if (x.rows() < 2) {
        std::fill(cm.constant.begin(), cm.constant.end(), true);
        return cm;
    }
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::VectorXd norms = centered.colwise().norm();
    for (Eigen::Index j = 0; j < p; ++j) cm.constant[static_cast<std::size_t>(j)] = !(norms(j) > 0);
    for (Eigen::Index i = 0; i < p; ++i) {
        if (cm.constant[static_cast<std::size_t>(i)]) continue;
        for (Eigen::Index j = i; j < p; ++j) {
            if (cm.constant[static_cast<std::size_t>(j)]) continue;
            const double r =
                i == j ? 1.0 : std::clamp(centered.col(i).dot(centered.col(j)) / (norms(i) * norms(j)), -1.0, 1.0);
            cm.r(i, j) = cm.r(j, i) = r;
        }
    }
    return cm;
}

double cfs_merit(std::span<const std::size_t> subset, std::span<const double> r_cf, const Eigen::MatrixXd& r_ff) {
    if (subset.empty()) return 0.0;
    const double k = static_cast<double>(subset.size());
    double cf = 0, ff = 0;
    for (std::size_t a = 0; a < subset.size(); ++a) {
        cf += r_cf[subset[a]];
        for (std::size_t b = a + 1; b < subset.size(); ++b)
            ff += r_ff(static_cast<Eigen::Index>(subset[a]), static_cast<Eigen::Index>(subset[b]));
    }
    const double mean_cf = cf / k;
    const double mean_ff = subset.size() > 1 ? ff / (k * (k - 1) / 2.0) : 0.0;
    return k * mean_cf / std::sqrt(k + k * (k - 1) * mean_ff);
}

CfsResult cfs_select(const Eigen::MatrixXd& data, std::span<const int> labels, const CfsOptions& opts) {
    const auto p = static_cast<std::size_t>(data.cols());
    if (p > 64) throw Error(Errc::BadFormat, "cfs_select: more than 64 features");
    if (static_cast<std::size_t>(data.rows()) != labels.size())
        throw Error(Errc::BadFormat, "cfs_select: label count does not match rows");
    if (labels.empty()) throw Error(Errc::EmptyInput, "cfs_select: no rows");

    Eigen::MatrixXd joined(data.rows(), data.cols() + 1);
    joined.leftCols(data.cols()) = data;
    for (Eigen::Index i = 0; i < data.rows(); ++i) joined(i, data.cols()) = labels[static_cast<std::size_t>(i)];
    const auto cm = pearson_matrix(joined, {});
    if (cm.constant[p]) throw Error(Errc::SingleClassInput, "cfs_select: one class only");

    CfsResult res;
    std::vector<double> r_cf(p, 0.0);
    Eigen::MatrixXd r_ff = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    std::vector<std::size_t> usable;
    for (std::size_t j = 0; j < p; ++j) {
        if (cm.constant[j]) {
            res.dropped_constant.push_back(j);
            continue;
        }
        usable.push_back(j);
        r_cf[j] = std::abs(cm.r(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p)));
        for (std::size_t k = 0; k < p; ++k)
            if (!cm.constant[k])
                r_ff(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                    std::abs(cm.r(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
    }

    auto members = [&](std::uint64_t mask) {
        std::vector<std::size_t> s;
        for (std::size_t j = 0; j < p; ++j)
            if (mask >> j & 1U) s.push_back(j);
        return s;
    };
    auto merit_of = [&](std::uint64_t mask) { return cfs_merit(members(mask), r_cf, r_ff); };

    // Open list ordered by merit, ties broken towards smaller masks for determinism.
    using Node = std::pair<double, std::uint64_t>;
    auto worse = [](const Node& a, const Node& b) { return a.first < b.first || (a.first == b.first && a.second > b.second); };
    std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
    std::set<std::uint64_t> seen{0};
    open.push({0.0, 0});
    std::uint64_t best_mask = 0;
    double best = 0;
    std::size_t stall = 0;
    while (!open.empty() && stall < opts.stall_limit) {
        const auto [m, mask] = open.top();
        open.pop();
        ++res.expansions;
        bool improved = false;
        for (std::size_t j : usable) {
            const std::uint64_t child = mask | (std::uint64_t{1} << j);
            if (child == mask || !seen.insert(child).second) continue;
            const double cm_merit = merit_of(child);
            open.push({cm_merit, child});
            if (cm_merit > best + 1e-12) {
                best = cm_merit;
                best_mask = child;
                improved = true;
            }
        }
        stall = improved ? 0 : stall + 1;
    }
    res.selected = members(best_mask);
    res.merit = best;
    return res;
}

}  // namespace flames::stats
