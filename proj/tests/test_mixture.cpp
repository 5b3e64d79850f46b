#include "alad/dataset.hpp"
#include "alad/mixture.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace alad;
using fixtures::blobs;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

// Density by the textbook formula with an explicit inverse and determinant.
double naive_density(const GmmModel& g, const Vector& x) {
    const double d = static_cast<double>(x.size());
    double p = 0.0;
    for (Index k = 0; k < g.K(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Matrix& S = g.covariances()[k];
        const Vector diff = x - g.means().row(kk).transpose();
        const double q = diff.dot(S.inverse() * diff);
        p += g.weights()(kk) * std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * M_PI, d) * S.determinant());
    }
    return p;
}

GmmModel random_model(Rng& r, Index K, Index d) {
    Vector w(static_cast<Eigen::Index>(K));
    for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = 0.1 + r.uniform();
    w /= w.sum();
    Matrix means(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d));
    std::vector<Matrix> covs;
    for (Index k = 0; k < K; ++k) {
        for (Index j = 0; j < d; ++j) means(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = 2.0 * r.normal();
        Matrix A(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = r.normal();
        covs.push_back(A * A.transpose() + 0.5 * Matrix::Identity(A.rows(), A.cols()));
    }
    return GmmModel(w, means, covs);
}

}  // namespace

TEST(Gmm, SingleComponentIsClosedForm) {
    const auto ds = make_synthetic(table_shaped_spec(200, 3, 5, 1), 2);
    GmmFitConfig cfg;
    const auto g = fit_em(ds.features, 1, cfg, 0);
    const Vector mean = ds.features.colwise().mean().transpose();
    const Matrix centered = ds.features.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(ds.n()) +
                       cfg.cov_reg * Matrix::Identity(3, 3);
    EXPECT_TRUE(g.means().row(0).transpose().isApprox(mean, 1e-9));
    EXPECT_TRUE(g.covariances()[0].isApprox(cov, 1e-9));
    EXPECT_NEAR(g.weights()(0), 1.0, 1e-12);
}

TEST(Gmm, RecoversTwoSeparatedBlobs) {
    const Matrix X = blobs({v2(0, 0), v2(10, 0)}, 200, 1.0, 3);
    const auto g = fit_em(X, 2, GmmFitConfig{}, 5);
    std::vector<Vector> truth{v2(0, 0), v2(10, 0)};
    for (const auto& t : truth) {
        double best = 1e9;
        for (Eigen::Index k = 0; k < 2; ++k) best = std::min(best, (g.means().row(k).transpose() - t).norm());
        EXPECT_LT(best, 0.2);
    }
}

TEST(Gmm, InvariantsAndMonotoneLikelihoodOnRandomFits) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng r(seed);
        const Index d = 1 + r.index(3);
        const Index K = 1 + r.index(4);
        const auto ds = make_synthetic(table_shaped_spec(60 + r.index(100), d, 3, seed), seed);
        const auto g = fit_em(ds.features, K, GmmFitConfig{}, seed);
        EXPECT_NEAR(g.weights().sum(), 1.0, 1e-9);
        EXPECT_GE(g.weights().minCoeff(), 0.0);
        for (const auto& S : g.covariances()) {
            EXPECT_LT((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-9);
            EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues().minCoeff(), 0.0);
        }
        const auto& trace = g.log_likelihood_trace();
        ASSERT_FALSE(trace.empty());
        for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-8);
        const Matrix lp = g.weighted_log_pdf(ds.features);
        for (Eigen::Index i = 0; i < lp.rows(); ++i) {
            const double lse = GmmModel::log_sum_exp(lp.row(i));
            EXPECT_NEAR((lp.row(i).array() - lse).exp().sum(), 1.0, 1e-9);
        }
    }
}

TEST(Gmm, RejectsTooFewRows) { EXPECT_THROW(fit_em(Matrix::Zero(2, 1), 3, GmmFitConfig{}, 0), ConfigError); }

TEST(Bic, ParameterCountArithmetic) {
    Rng r(1);
    Matrix X(100, 1);
    for (Eigen::Index i = 0; i < 100; ++i) X(i, 0) = r.normal();
    const auto g = fit_em(X, 1, GmmFitConfig{}, 0);
    EXPECT_EQ(g.parameter_count(), 2u);
    EXPECT_NEAR(bic(g, X), -2.0 * g.log_likelihood(X) + 2.0 * std::log(100.0), 1e-9);
    EXPECT_EQ(bic(g, X), bic(g, X));
    EXPECT_EQ(random_model(r, 3, 2).parameter_count(), 2u + 6u + 9u);
    EXPECT_THROW(bic(g, Matrix::Zero(3, 2)), ConfigError);
}

TEST(Bic, TrueModelBeatsOverfit) {
    const Matrix X = blobs({v2(0, 0), v2(10, 0)}, 250, 1.0, 8);
    const auto g2 = fit_em(X, 2, GmmFitConfig{}, 1);
    const auto g10 = fit_em(X, 10, GmmFitConfig{}, 1);
    EXPECT_LT(bic(g2, X), bic(g10, X));
}

TEST(SelectK, ThreeBlobsMostSeeds) {
    int hits = 0;
    GmmFitConfig cfg;
    cfg.k_max = 8;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix X = blobs({v2(0, 0), v2(10, 0), v2(0, 10)}, 100, 1.0, 100 + seed);
        hits += select_k(X, cfg, seed).K() == 3;
    }
    EXPECT_GE(hits, 18);
}

TEST(SelectK, ReturnsMinimumBicOfSearchedRange) {
    const Matrix X = blobs({v2(0, 0), v2(6, 0), v2(0, 6)}, 40, 1.0, 4);
    GmmFitConfig cfg;
    cfg.k_max = 6;
    cfg.bic_patience = 0;
    const auto rep = select_k_report(X, cfg, 2);
    ASSERT_EQ(rep.bic_by_k.size(), 6u);
    const double chosen = bic(rep.model, X);
    for (const auto& [k, b] : rep.bic_by_k) EXPECT_LE(chosen, b + 1e-9) << "K=" << k;
}

TEST(SelectK, TruncatesSearchToRowCount) {
    Matrix X(2, 1);
    X << 0.0, 1.0;
    GmmFitConfig cfg;
    cfg.k_max = 8;
    cfg.min_points_per_component = 0;
    const auto rep = select_k_report(X, cfg, 0);
    ASSERT_EQ(rep.bic_by_k.size(), 2u);
    EXPECT_EQ(rep.bic_by_k.back().first, 2u);

    cfg.min_points_per_component = 10;
    Matrix Y = blobs({v2(0, 0)}, 35, 1.0, 1);
    EXPECT_LE(select_k_report(Y, cfg, 0).bic_by_k.size(), 3u);
}

TEST(SelectK, TightBlobIsOneComponent) {
    const Matrix X = blobs({v2(0, 0)}, 300, 0.5, 6);
    EXPECT_EQ(select_k(X, GmmFitConfig{}, 3).K(), 1u);
}

TEST(Density, PeakOfStandardNormal) {
    for (Index d = 1; d <= 4; ++d) {
        const auto dd = static_cast<Eigen::Index>(d);
        GmmModel g(Vector::Ones(1), Matrix::Zero(1, dd), {Matrix::Identity(dd, dd)});
        EXPECT_NEAR(g.log_density(Vector::Zero(dd)), -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI), 1e-12);
    }
}

TEST(Density, OneDimensionalQuadratureIntegratesToOne) {
    Rng r(4);
    Matrix X(300, 1);
    for (Eigen::Index i = 0; i < 300; ++i) X(i, 0) = (i % 3 == 0 ? 5.0 : 0.0) + r.normal();
    const auto g = select_k(X, GmmFitConfig{}, 1);
    double lo = 1e9, hi = -1e9;
    for (Index k = 0; k < g.K(); ++k) {
        const double mu = g.means()(static_cast<Eigen::Index>(k), 0);
        const double sd = std::sqrt(g.covariances()[k](0, 0));
        lo = std::min(lo, mu - 10.0 * sd);
        hi = std::max(hi, mu + 10.0 * sd);
    }
    const int n = 200000;
    const double h = (hi - lo) / n;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        integral += w * std::exp(g.log_density(Vector::Constant(1, lo + i * h)));
    }
    EXPECT_NEAR(integral * h, 1.0, 1e-3);
}

TEST(Density, AgreesWithNaiveDirectSum) {
    Rng r(12);
    for (int trial = 0; trial < 50; ++trial) {
        const Index d = 1 + r.index(3);
        const auto g = random_model(r, 1 + r.index(4), d);
        for (int q = 0; q < 10; ++q) {
            Vector x(static_cast<Eigen::Index>(d));
            for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = 2.0 * r.normal();
            EXPECT_NEAR(g.log_density(x), std::log(naive_density(g, x)), 1e-8);
        }
    }
    // far from every component: still finite
    const auto g = random_model(r, 2, 2);
    EXPECT_TRUE(std::isfinite(g.log_density(v2(1e3, -1e3))));
}

TEST(ScoreSamples, RowwiseOutlierAndPermutation) {
    const Matrix X = blobs({v2(0, 0)}, 100, 1.0, 2);
    const auto g = fit_em(X, 1, GmmFitConfig{}, 0);
    Matrix Y(4, 2);
    Y << 0, 0, 1, 0, 20, 0, 0, 1;
    const Vector s = g.score_samples(Y);
    Eigen::Index argmin;
    s.minCoeff(&argmin);
    EXPECT_EQ(argmin, 2);
    EXPECT_DOUBLE_EQ(g.score_samples(Y.topRows(1))(0), g.log_density(Y.row(0).transpose()));
    Matrix P(4, 2);
    P << Y.row(3), Y.row(1), Y.row(0), Y.row(2);
    const Vector sp = g.score_samples(P);
    EXPECT_DOUBLE_EQ(sp(0), s(3));
    EXPECT_DOUBLE_EQ(sp(3), s(2));
    EXPECT_THROW(g.score_samples(Matrix::Zero(1, 3)), ConfigError);
}

TEST(Gmm, JsonRoundTrip) {
    Rng r(5);
    const auto g = random_model(r, 3, 2);
    const auto back = GmmModel::from_json(nlohmann::json::parse(g.to_json().dump()));
    EXPECT_EQ(back.K(), 3u);
    EXPECT_EQ(back.weights(), g.weights());
    EXPECT_EQ(back.means(), g.means());
    EXPECT_DOUBLE_EQ(back.log_density(v2(0.3, -0.2)), g.log_density(v2(0.3, -0.2)));
}
