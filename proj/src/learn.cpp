#include "flames/learn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "flames/error.hpp"
#include "flames/io.hpp"
#include "flames/text.hpp"

namespace flames::learn {

namespace {

constexpr double kLn2Pi = 1.8378770664093454836;

Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const std::vector<Transform>& t) {
    Eigen::MatrixXd out = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (t[static_cast<std::size_t>(j)] == Transform::Log1p)
            out.col(j) = x.col(j).unaryExpr([](double v) { return std::log1p(std::max(v, 0.0)); });
    return out;
}

void check_labels(std::span<const int> y) {
    bool pos = false, neg = false;
    for (int v : y) (v > 0 ? pos : neg) = true;
    if (!pos || !neg) throw Error(Errc::SingleClassInput, "labels contain a single class");
}

}  // namespace

Preprocessor Preprocessor::fit(const Eigen::MatrixXd& x, std::vector<Transform> transforms) {
    Preprocessor p;
    if (transforms.empty()) transforms.assign(static_cast<std::size_t>(x.cols()), Transform::Identity);
    if (static_cast<Eigen::Index>(transforms.size()) != x.cols())
        throw Error(Errc::ModelFeatureMismatch, "transform count does not match feature count");
    p.transforms = std::move(transforms);
    const Eigen::MatrixXd t = forward(x, p.transforms);
    p.mean = t.colwise().mean().transpose();
    p.scale.resize(t.cols());
    const double denom = std::max<double>(1.0, static_cast<double>(t.rows() - 1));
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
        const double sd = std::sqrt((t.col(j).array() - p.mean(j)).square().sum() / denom);
        p.scale(j) = sd > 0 ? sd : 1.0;
    }
    return p;
}

Eigen::MatrixXd Preprocessor::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != dims()) throw Error(Errc::ModelFeatureMismatch, "feature count does not match preprocessor");
    Eigen::MatrixXd z = forward(x, transforms);
    z.rowwise() -= mean.transpose();
    z.array().rowwise() /= scale.transpose().array();
    return z;
}

Eigen::MatrixXd Preprocessor::invert(const Eigen::MatrixXd& z) const {
    if (z.cols() != dims()) throw Error(Errc::ModelFeatureMismatch, "feature count does not match preprocessor");
    Eigen::MatrixXd x = z.array().rowwise() * scale.transpose().array();
    x.rowwise() += mean.transpose();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (transforms[static_cast<std::size_t>(j)] == Transform::Log1p)
            x.col(j) = x.col(j).unaryExpr([](double v) { return std::max(0.0, std::expm1(v)); });
    return x;
}

std::vector<Transform> heavy_tail_transforms(const Eigen::MatrixXd& x) {
    std::vector<Transform> t(static_cast<std::size_t>(x.cols()), Transform::Identity);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (x.col(j).minCoeff() < 0) continue;
        std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
        const auto m = stats::moments(col);
        if (!m.degenerate && m.skewness > 1.0) t[static_cast<std::size_t>(j)] = Transform::Log1p;
    }
    return t;
}

double svm_objective(const LinearSvm& m, const Eigen::MatrixXd& x, std::span<const int> y, double lambda) {
    double hinge = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        hinge += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * m.decision(x.row(i)));
    return 0.5 * lambda * m.w.squaredNorm() + hinge / static_cast<double>(x.rows());
}

LinearSvm train_svm(const Eigen::MatrixXd& x, std::span<const int> y, const SvmOptions& opts) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw Error(Errc::BadFormat, "label count does not match rows");
    check_labels(y);
    LinearSvm m;
    m.w = Eigen::VectorXd::Zero(x.cols());
    std::mt19937_64 rng(opts.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), 0);
    double t = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            const double eta = opts.eta0 / (1.0 + opts.lambda * opts.eta0 * t);
            const double yi = y[static_cast<std::size_t>(i)] > 0 ? 1.0 : -1.0;
            const double margin = yi * m.decision(x.row(i));
            m.w *= 1.0 - eta * opts.lambda;
            if (margin < 1.0) {
                m.w += eta * yi * x.row(i).transpose();
                m.b += eta * yi;
            }
            t += 1;
        }
        m.objective.push_back(svm_objective(m, x, y, opts.lambda));
    }
    return m;
}

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> fold(y.size(), 0);
    for (int cls : {1, -1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < y.size(); ++i)
            if ((y[i] > 0 ? 1 : -1) == cls) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    }
    return fold;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

}  // namespace

CvResult cross_validate_svm(const Eigen::MatrixXd& x, std::span<const int> y, int folds, const SvmOptions& opts,
                            const std::vector<Transform>& transforms) {
    check_labels(y);
    const auto fold = stratified_folds(y, folds, opts.seed);
    CvResult r;
    std::size_t correct = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        std::vector<int> ytr, yte;
        for (std::size_t i = 0; i < y.size(); ++i) {
            (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
            (fold[i] == f ? yte : ytr).push_back(y[i]);
        }
        if (te.empty()) continue;
        const Eigen::MatrixXd xtr = take_rows(x, tr);
        const auto prep = Preprocessor::fit(xtr, transforms);
        const auto model = train_svm(prep.apply(xtr), ytr, opts);
        const Eigen::MatrixXd zte = prep.apply(take_rows(x, te));
        std::size_t ok = 0;
        for (Eigen::Index i = 0; i < zte.rows(); ++i)
            if (model.predict(zte.row(i)) == (yte[static_cast<std::size_t>(i)] > 0 ? 1 : -1)) ++ok;
        correct += ok;
        r.fold_accuracy.push_back(static_cast<double>(ok) / static_cast<double>(te.size()));
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
    return r;
}

KMeansResult kmeans(const Eigen::MatrixXd& x, int k, const KMeansOptions& opts) {
    const Eigen::Index n = x.rows();
    if (k < 1) throw Error(Errc::BadFormat, "k must be positive");
    if (k > n) throw Error(Errc::KExceedsN, fmt::format("k = {} exceeds {} rows", k, n));
    std::mt19937_64 rng(opts.seed);
    KMeansResult r;
    r.centroids.resize(k, x.cols());

    Eigen::VectorXd d2(n);
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    r.centroids.row(0) = x.row(first(rng));
    d2 = (x.rowwise() - r.centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        Eigen::Index pick = 0;
        const double total = d2.sum();
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= target && d2(i) > 0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        r.centroids.row(c) = x.row(pick);
        d2 = d2.cwiseMin((x.rowwise() - r.centroids.row(c)).rowwise().squaredNorm());
    }

    r.assignment.assign(static_cast<std::size_t>(n), -1);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iterations; ++it) {
        r.iterations = it + 1;
        bool changed = false;
        double inertia = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            const double dist = (r.centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
            inertia += dist;
            d2(i) = dist;
            if (r.assignment[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
                r.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
                changed = true;
            }
        }
        r.inertia = inertia;
        r.inertia_history.push_back(inertia);
        if (!changed || std::abs(prev - inertia) <= opts.tolerance * std::max(prev, 1e-300)) {
            r.converged = true;
            break;
        }
        prev = inertia;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto c = r.assignment[static_cast<std::size_t>(i)];
            sums.row(c) += x.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                // Reseed an empty cluster at the point farthest from its centroid.
                Eigen::Index far = 0;
                d2.maxCoeff(&far);
                r.centroids.row(c) = x.row(far);
                d2(far) = 0;
            }
        }
    }
    return r;
}

std::optional<double> silhouette(const Eigen::MatrixXd& x, std::span<const int> assignment) {
    if (assignment.empty()) return std::nullopt;
    const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
    std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
    for (int a : assignment) ++size[static_cast<std::size_t>(a)];
    if (std::count_if(size.begin(), size.end(), [](std::size_t s) { return s > 0; }) < 2) return std::nullopt;
    const Eigen::Index n = x.rows();
    std::vector<double> sum(static_cast<std::size_t>(k));
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(sum.begin(), sum.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) sum[static_cast<std::size_t>(assignment[static_cast<std::size_t>(j)])] += (x.row(i) - x.row(j)).norm();
        const auto own = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
        if (size[own] <= 1) continue;  // singleton: s = 0
        const double a = sum[own] / static_cast<double>(size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sum.size(); ++c)
            if (c != own && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
        const double m = std::max(a, b);
        if (m > 0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

double purity(std::span<const int> assignment, std::span<const int> labels) {
    if (assignment.empty()) return 0.0;
    std::map<int, std::map<int, std::size_t>> table;
    for (std::size_t i = 0; i < assignment.size(); ++i) ++table[assignment[i]][labels[i]];
    std::size_t hit = 0;
    for (const auto& [c, counts] : table) {
        std::size_t best = 0;
        for (const auto& [l, cnt] : counts) best = std::max(best, cnt);
        hit += best;
    }
    return static_cast<double>(hit) / static_cast<double>(assignment.size());
}

namespace {

// Cholesky factor with escalating jitter; counts the jitter events.
Eigen::LLT<Eigen::MatrixXd> robust_llt(Eigen::MatrixXd& cov, double jitter, int* events) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    double add = jitter;
    for (int tries = 0; llt.info() != Eigen::Success && tries < 12; ++tries, add *= 10) {
        cov.diagonal().array() += add;
        if (events) ++*events;
        llt.compute(cov);
    }
    if (llt.info() != Eigen::Success) throw Error(Errc::DegenerateComponent, "covariance is not positive definite");
    return llt;
}

// log N(z | mu, L L^T) for every row.
Eigen::VectorXd log_gauss(const Eigen::MatrixXd& z, const Eigen::VectorXd& mu, const Eigen::LLT<Eigen::MatrixXd>& llt) {
    const Eigen::MatrixXd diff = (z.rowwise() - mu.transpose()).transpose();
    const Eigen::MatrixXd sol = llt.matrixL().solve(diff);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double d = static_cast<double>(z.cols());
    return (-0.5 * (sol.colwise().squaredNorm().array() + d * kLn2Pi + logdet)).transpose();
}

// Row-wise log-sum-exp of per-component weighted log densities; fills resp.
double e_step(const Eigen::MatrixXd& z, const GmmModel& m, double jitter, int* events, Eigen::MatrixXd* resp) {
    const int k = m.components();
    Eigen::MatrixXd lp(z.rows(), k);
    for (int c = 0; c < k; ++c) {
        Eigen::MatrixXd cov = m.covariances[static_cast<std::size_t>(c)];
        const auto llt = robust_llt(cov, jitter, events);
        lp.col(c) = log_gauss(z, m.means[static_cast<std::size_t>(c)], llt).array() + std::log(m.weights(c));
    }
    const Eigen::VectorXd mx = lp.rowwise().maxCoeff();
    const Eigen::VectorXd lse = mx.array() + (lp.colwise() - mx).array().exp().rowwise().sum().log();
    if (resp) *resp = (lp.colwise() - lse).array().exp();
    return lse.mean();
}

void m_step(const Eigen::MatrixXd& z, const Eigen::MatrixXd& resp, double prune, GmmModel& m, int* pruned) {
    const double n = static_cast<double>(z.rows());
    std::vector<double> w;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (Eigen::Index c = 0; c < resp.cols(); ++c) {
        const double nk = resp.col(c).sum();
        if (nk / n < prune || nk <= 1e-12) {
            if (pruned) ++*pruned;
            continue;
        }
        Eigen::VectorXd mu = (z.transpose() * resp.col(c)) / nk;
        const Eigen::MatrixXd centered = z.rowwise() - mu.transpose();
        Eigen::MatrixXd cov = (centered.array().colwise() * resp.col(c).array()).matrix().transpose() * centered / nk;
        cov = 0.5 * (cov + cov.transpose());
        w.push_back(nk / n);
        means.push_back(std::move(mu));
        covs.push_back(std::move(cov));
    }
    if (w.empty()) throw Error(Errc::DegenerateComponent, "every component was pruned");
    m.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.weights /= m.weights.sum();
    m.means = std::move(means);
    m.covariances = std::move(covs);
}

}  // namespace

double GmmModel::mean_log_likelihood(const Eigen::MatrixXd& z) const {
    return e_step(z, *this, 1e-6, nullptr, nullptr);
}

std::size_t GmmModel::parameter_count() const {
    const auto k = static_cast<std::size_t>(components());
    const auto d = static_cast<std::size_t>(dims());
    return (k - 1) + k * d + k * d * (d + 1) / 2;
}

Eigen::MatrixXd GmmModel::sample(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> pick(weights.data(), weights.data() + weights.size());
    std::normal_distribution<double> normal;
    std::vector<Eigen::MatrixXd> chol;
    for (auto cov : covariances) chol.push_back(robust_llt(cov, 1e-6, nullptr).matrixL());
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), dims());
    Eigen::VectorXd eps(dims());
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(pick(rng));
        for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = normal(rng);
        z.row(static_cast<Eigen::Index>(i)) = (means[c] + chol[c] * eps).transpose();
    }
    return prep.invert(z);
}

GmmFit fit_gmm(const Eigen::MatrixXd& x, int k, const Preprocessor& prep, std::vector<std::string> names,
               const GmmOptions& opts) {
    if (k > x.rows()) throw Error(Errc::KExceedsN, fmt::format("k = {} exceeds {} rows", k, x.rows()));
    if (static_cast<Eigen::Index>(names.size()) != x.cols())
        throw Error(Errc::ModelFeatureMismatch, "feature names do not match columns");
    GmmFit fit;
    fit.model.feature_names = std::move(names);
    fit.model.prep = prep;
    const Eigen::MatrixXd z = prep.apply(x);

    KMeansOptions ko;
    ko.seed = opts.seed;
    const auto km = kmeans(z, k, ko);
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(z.rows(), k);
    for (std::size_t i = 0; i < km.assignment.size(); ++i) resp(static_cast<Eigen::Index>(i), km.assignment[i]) = 1.0;
    // Hard initial assignments can leave a singleton cluster; blend in a little
    // uniform mass so every initial covariance has full support.
    resp = 0.999 * resp.array() + 0.001 / k;
    m_step(z, resp, opts.prune_weight, fit.model, &fit.pruned);

    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iterations; ++it) {
        const double ll = e_step(z, fit.model, opts.jitter, &fit.jitter_events, &resp);
        fit.log_likelihood.push_back(ll);
        fit.iterations = it + 1;
        if (std::isfinite(prev) && std::abs(ll - prev) <= opts.tolerance * std::abs(prev)) {
            fit.converged = true;
            break;
        }
        prev = ll;
        m_step(z, resp, opts.prune_weight, fit.model, &fit.pruned);
    }
    const double n = static_cast<double>(z.rows());
    fit.bic = -2.0 * n * fit.log_likelihood.back() + static_cast<double>(fit.model.parameter_count()) * std::log(n);
    return fit;
}

GmmSelection select_gmm(const Eigen::MatrixXd& x, int k_max, const Preprocessor& prep,
                        std::vector<std::string> names, const GmmOptions& opts) {
    GmmSelection sel;
    bool have = false;
    for (int k = 1; k <= k_max && k <= x.rows(); ++k) {
        GmmFit f;
        bool fitted = false;
        for (int r = 0; r < std::max(1, opts.restarts); ++r) {
            GmmOptions o = opts;
            o.seed = opts.seed + static_cast<std::uint64_t>(r) * 0x9e3779b97f4a7c15ULL;
            try {
                auto g = fit_gmm(x, k, prep, names, o);
                if (!fitted || g.log_likelihood.back() > f.log_likelihood.back()) f = std::move(g);
                fitted = true;
            } catch (const Error& e) {
                if (e.code() != Errc::DegenerateComponent) throw;
            }
        }
        if (!fitted) continue;
        sel.bic.emplace_back(k, f.bic);
        if (!have || f.bic < sel.best.bic) {
            sel.best = std::move(f);
            have = true;
        }
    }
    if (!have) throw Error(Errc::DegenerateComponent, "no mixture could be fitted");
    return sel;
}

namespace {

void write_vec(std::ostream& out, std::string_view key, const double* v, Eigen::Index n) {
    out << key;
    for (Eigen::Index i = 0; i < n; ++i) out << ' ' << text::format_double(v[i]);
    out << '\n';
}

std::vector<std::string> tokens_after(std::istream& in, std::string_view key) {
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string head;
        ss >> head;
        if (head != key) throw Error(Errc::BadFormat, fmt::format("model file: expected '{}', got '{}'", key, head));
        std::vector<std::string> out;
        for (std::string t; ss >> t;) out.push_back(t);
        return out;
    }
    throw Error(Errc::BadFormat, fmt::format("model file: missing '{}'", key));
}

std::vector<double> doubles_after(std::istream& in, std::string_view key, std::size_t expect) {
    std::vector<double> out;
    for (const auto& t : tokens_after(in, key)) {
        auto v = text::parse_double(t);
        if (!v) throw Error(Errc::BadFormat, fmt::format("model file: bad number '{}' in '{}'", t, key));
        out.push_back(*v);
    }
    if (out.size() != expect)
        throw Error(Errc::BadFormat, fmt::format("model file: '{}' has {} values, expected {}", key, out.size(), expect));
    return out;
}

std::size_t count_after(std::istream& in, std::string_view key) {
    const auto t = tokens_after(in, key);
    std::optional<std::uint64_t> v;
    if (t.size() == 1) v = text::parse_uint(t[0]);
    if (!v) throw Error(Errc::BadFormat, fmt::format("model file: bad '{}'", key));
    return static_cast<std::size_t>(*v);
}

}  // namespace

void save_gmm(const GmmModel& m, std::ostream& out) {
    const auto d = m.dims();
    out << kGmmFormatTag << '\n';
    out << "components " << m.components() << '\n';
    out << "dims " << d << '\n';
    out << "features";
    for (const auto& n : m.feature_names) out << ' ' << n;
    out << "\ntransforms";
    for (auto t : m.prep.transforms) out << ' ' << (t == Transform::Log1p ? "log1p" : "identity");
    out << '\n';
    write_vec(out, "center", m.prep.mean.data(), d);
    write_vec(out, "scale", m.prep.scale.data(), d);
    write_vec(out, "weights", m.weights.data(), m.weights.size());
    for (int c = 0; c < m.components(); ++c) {
        write_vec(out, "mean", m.means[static_cast<std::size_t>(c)].data(), d);
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cov =
            m.covariances[static_cast<std::size_t>(c)];
        write_vec(out, "cov", cov.data(), d * d);
    }
}

GmmModel load_gmm(std::istream& in) {
    std::string line;
    while (std::getline(in, line) && text::trim(line).empty()) {}
    if (text::trim(line) != kGmmFormatTag) throw Error(Errc::BadFormat, "model file: missing format tag");
    GmmModel m;
    const auto k = count_after(in, "components");
    const auto d = count_after(in, "dims");
    if (k == 0 || d == 0) throw Error(Errc::BadFormat, "model file: empty model");
    m.feature_names = tokens_after(in, "features");
    if (m.feature_names.size() != d) throw Error(Errc::BadFormat, "model file: feature count does not match dims");
    for (const auto& t : tokens_after(in, "transforms")) {
        if (t == "log1p")
            m.prep.transforms.push_back(Transform::Log1p);
        else if (t == "identity")
            m.prep.transforms.push_back(Transform::Identity);
        else
            throw Error(Errc::BadFormat, "model file: unknown transform '" + t + "'");
    }
    if (m.prep.transforms.size() != d) throw Error(Errc::BadFormat, "model file: transform count does not match dims");
    auto to_vec = [](const std::vector<double>& v) {
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    m.prep.mean = to_vec(doubles_after(in, "center", d));
    m.prep.scale = to_vec(doubles_after(in, "scale", d));
    m.weights = to_vec(doubles_after(in, "weights", k));
    for (std::size_t c = 0; c < k; ++c) {
        m.means.push_back(to_vec(doubles_after(in, "mean", d)));
        const auto cov = doubles_after(in, "cov", d * d);
        m.covariances.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            cov.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
    }
    return m;
}

void save_gmm(const GmmModel& m, const std::string& path) {
    auto out = io::open_output(path);
    save_gmm(m, out);
}

GmmModel load_gmm(const std::string& path) {
    auto in = io::open_input(path);
    return load_gmm(in);
}

SynthesisReport compare_features(const Eigen::MatrixXd& real, const Eigen::MatrixXd& synthetic,
                                 const std::vector<std::string>& names) {
    if (real.cols() != synthetic.cols() || static_cast<Eigen::Index>(names.size()) != real.cols())
        throw Error(Errc::ModelFeatureMismatch, "real and synthetic feature sets differ");
    SynthesisReport r;
    std::vector<double> ks;
    for (Eigen::Index j = 0; j < real.cols(); ++j) {
        std::vector<double> a(real.col(j).data(), real.col(j).data() + real.rows());
        std::vector<double> b(synthetic.col(j).data(), synthetic.col(j).data() + synthetic.rows());
        const auto t = stats::ks_two_sample(a, b);
        r.features.push_back({names[static_cast<std::size_t>(j)], t.statistic, t.p});
        ks.push_back(t.statistic);
    }
    if (ks.empty()) return r;
    const auto m = stats::moments(ks);
    r.average = m.mean;
    r.std = ks.size() > 1 ? m.std : 0.0;
    r.min = *std::min_element(ks.begin(), ks.end());
    r.max = *std::max_element(ks.begin(), ks.end());
    return r;
}

}  // namespace flames::learn
