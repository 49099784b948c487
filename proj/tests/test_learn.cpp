#include <doctest.h>

#include <random>
#include <sstream>

#include "flames/error.hpp"
#include "flames/learn.hpp"

using namespace flames;
using namespace flames::learn;

namespace {

struct Blobs {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

Blobs blobs(int n, double sep, std::uint64_t seed, int d = 2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    Blobs b;
    b.x.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const int label = i % 2 ? 1 : -1;
        b.y.push_back(label);
        for (int j = 0; j < d; ++j) b.x(i, j) = n01(rng) + (j == 0 ? label * sep / 2 : 0);
    }
    return b;
}

Eigen::MatrixXd mixture(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::bernoulli_distribution first(0.6);
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
        const bool a = first(rng);
        x(i, 0) = (a ? -3 : 3) + n01(rng);
        x(i, 1) = (a ? 0 : 2) + (a ? 1.0 : 0.5) * n01(rng);
    }
    return x;
}

}  // namespace

TEST_SUITE("learn") {

TEST_CASE("preprocessor round trip") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 10, 2, 100, 3, 1000, 4, 10000;
    auto p = Preprocessor::fit(x, {Transform::Identity, Transform::Log1p});
    const auto z = p.apply(x);
    CHECK(z.col(0).mean() == doctest::Approx(0).epsilon(1e-12));
    CHECK((p.invert(z) - x).cwiseAbs().maxCoeff() < 1e-9 * 10000);

    Eigen::MatrixXd skew(1000, 2);
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> ln(0, 1.5);
    std::normal_distribution<double> n01;
    for (int i = 0; i < 1000; ++i) {
        skew(i, 0) = ln(rng);
        skew(i, 1) = n01(rng);
    }
    CHECK(heavy_tail_transforms(skew) == std::vector<Transform>{Transform::Log1p, Transform::Identity});
}

TEST_CASE("svm on separable and shuffled data") {
    const auto b = blobs(1000, 8, 1);
    CHECK(cross_validate_svm(b.x, b.y).accuracy >= 0.99);

    auto shuffled = b.y;
    std::mt19937_64 rng(2);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(std::abs(cross_validate_svm(b.x, shuffled).accuracy - 0.5) < 0.05);

    std::vector<int> one(b.y.size(), 1);
    CHECK_THROWS_AS(train_svm(b.x, one), Error);
}

TEST_CASE("svm objective falls and is deterministic") {
    const auto b = blobs(600, 2, 3, 4);
    const auto m = train_svm(b.x, b.y, {.lambda = 1e-3, .epochs = 40});
    REQUIRE(m.objective.size() == 40);
    const auto mean = [&](std::size_t lo, std::size_t hi) {
        double s = 0;
        for (std::size_t i = lo; i < hi; ++i) s += m.objective[i];
        return s / static_cast<double>(hi - lo);
    };
    CHECK(mean(30, 40) <= mean(0, 10));
    const auto again = train_svm(b.x, b.y, {.lambda = 1e-3, .epochs = 40});
    CHECK(again.w == m.w);
    CHECK(again.b == m.b);
}

TEST_CASE("svm does not depend on feature order") {
    const auto b = blobs(400, 3, 4, 3);
    Eigen::MatrixXd perm(b.x.rows(), 3);
    perm.col(0) = b.x.col(2);
    perm.col(1) = b.x.col(0);
    perm.col(2) = b.x.col(1);
    const auto a = cross_validate_svm(b.x, b.y);
    const auto p = cross_validate_svm(perm, b.y);
    CHECK(a.accuracy == doctest::Approx(p.accuracy).epsilon(0.01));
}

TEST_CASE("stratified folds") {
    std::vector<int> y;
    for (int i = 0; i < 100; ++i) y.push_back(i < 30 ? 1 : -1);
    const auto f = stratified_folds(y, 5, 1);
    for (int k = 0; k < 5; ++k) {
        int pos = 0, tot = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (f[i] == k) {
                ++tot;
                pos += y[i] == 1;
            }
        CHECK(tot == 20);
        CHECK(pos == 6);
    }
}

TEST_CASE("kmeans") {
    const auto b = blobs(1000, 12, 5);
    const auto r = kmeans(b.x, 2);
    CHECK(purity(r.assignment, b.y) >= 0.99);
    CHECK(*silhouette(b.x, r.assignment) > 0.6);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
        CHECK(r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-9);

    const auto one = kmeans(b.x, 1);
    CHECK_FALSE(silhouette(b.x, one.assignment).has_value());
    CHECK_THROWS_AS(kmeans(b.x.topRows(3), 4), Error);

    const auto noisy = blobs(300, 0.5, 6, 3);
    for (int k = 2; k <= 5; ++k) {
        const auto s = *silhouette(noisy.x, kmeans(noisy.x, k).assignment);
        CHECK(s >= -1);
        CHECK(s <= 1);
    }
}

TEST_CASE("gmm em is monotone and recovers weights") {
    const auto x = mixture(10000, 7);
    const auto prep = Preprocessor::fit(x);
    const auto f = fit_gmm(x, 2, prep, {"a", "b"});
    for (std::size_t i = 1; i < f.log_likelihood.size(); ++i)
        CHECK(f.log_likelihood[i] >= f.log_likelihood[i - 1] - 1e-12);
    const double w = std::max(f.model.weights(0), f.model.weights(1));
    CHECK(std::abs(w - 0.6) < 0.05);
    CHECK(f.model.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& c : f.model.covariances) CHECK(c.llt().info() == Eigen::Success);

    const auto sel = select_gmm(x, 4, prep, {"a", "b"});
    CHECK(sel.best.model.components() == 2);
    CHECK(sel.bic.size() == 4);
}

TEST_CASE("single gaussian closed form") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd x(100000, 2);
    for (int i = 0; i < x.rows(); ++i) {
        const double a = n01(rng), b = n01(rng);
        x(i, 0) = 5 + 2 * a;
        x(i, 1) = -1 + a + b;
    }
    const auto prep = Preprocessor::fit(x);
    const auto f = fit_gmm(x, 1, prep, {"a", "b"});
    const auto samples = f.model.sample(100000, 3);
    CHECK(samples.col(0).mean() == doctest::Approx(5).epsilon(0.02));
    const Eigen::MatrixXd c = samples.rowwise() - samples.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(samples.rows() - 1);
    CHECK(cov(0, 0) == doctest::Approx(4).epsilon(0.02));
    CHECK(cov(0, 1) == doctest::Approx(2).epsilon(0.02));
    CHECK(cov(1, 1) == doctest::Approx(2).epsilon(0.02));
}

TEST_CASE("gmm sampling and persistence") {
    const auto x = mixture(10000, 9);
    const auto prep = Preprocessor::fit(x);
    const auto m = fit_gmm(x, 2, prep, {"a", "b"}).model;
    CHECK(m.sample(0, 1).rows() == 0);
    CHECK(m.sample(100, 5) == m.sample(100, 5));
    CHECK(m.sample(100, 5) != m.sample(100, 6));

    // self-consistency: model-vs-model samples
    const auto a = m.sample(10000, 1), b = m.sample(10000, 2);
    const auto rep = compare_features(a, b, {"a", "b"});
    for (const auto& f : rep.features) CHECK(f.ks < 0.05);

    std::stringstream s;
    save_gmm(m, s);
    const auto back = load_gmm(s);
    CHECK(back.feature_names == m.feature_names);
    CHECK(back.weights == m.weights);
    CHECK(back.prep.mean == m.prep.mean);
    CHECK(back.prep.scale == m.prep.scale);
    for (int k = 0; k < m.components(); ++k) {
        CHECK(back.means[static_cast<std::size_t>(k)] == m.means[static_cast<std::size_t>(k)]);
        CHECK(back.covariances[static_cast<std::size_t>(k)] == m.covariances[static_cast<std::size_t>(k)]);
    }
    CHECK(back.sample(50, 3) == m.sample(50, 3));

    std::stringstream bad("not-a-model\n");
    CHECK_THROWS_AS(load_gmm(bad), Error);
}

}
