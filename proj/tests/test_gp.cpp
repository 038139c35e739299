#include "cgp/compress.hpp"
#include "cgp/errors.hpp"
#include "cgp/exact_gp.hpp"
#include "cgp/lowrank_gp.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <numeric>

using namespace cgp;

namespace {

struct Instance {
    RowMatrix z;
    Vector y;
    RowMatrix test;
    double lambda;
};

Instance random_instance(std::mt19937_64& gen, Index n, Index m, Index n_test) {
    std::uniform_real_distribution<double> lam(0.1, 2.0);
    Instance in;
    in.z = oracle::gaussian_matrix(gen, n, m);
    in.y = oracle::centered(oracle::gaussian_vector(gen, n, 2.0));
    in.test = oracle::gaussian_matrix(gen, n_test, m);
    in.lambda = lam(gen);
    return in;
}

Vector sqrt_diag(const oracle::LMatrix& m) { return m.diagonal().cast<double>().cwiseSqrt(); }

} // namespace

TEST_CASE("single observation closed forms") {
    RowMatrix z(1, 1);
    z << 0.3;
    Vector y(1);
    y << 1.7;
    const GpPosterior post = fit_unchecked(z, y, Bandwidth(1.0));
    CHECK(post.b() == doctest::Approx(1.7 * 1.7 / 4.0).epsilon(1e-14));
    const PosteriorMu mu = posterior_mu(post);
    CHECK(mu.mean[0] == doctest::Approx(0.85).epsilon(1e-14));
    const PredictiveDistribution pd = predict(post, z);
    CHECK(pd.locations[0] == doctest::Approx(0.85).epsilon(1e-14));
    CHECK(pd.scales[0] * pd.scales[0] == doctest::Approx(2.0 * post.b() * 1.5).epsilon(1e-14));
    CHECK(log_marginal(post) == doctest::Approx(-std::log(1.7)).epsilon(1e-13));
}

TEST_CASE("zero response is flagged as degenerate") {
    std::mt19937_64 gen(1);
    const RowMatrix z = oracle::gaussian_matrix(gen, 5, 2);
    const GpPosterior post = fit(z, Vector::Zero(5), Bandwidth(1.0));
    CHECK(post.degenerate());
    CHECK(post.b() == 0.0);
    CHECK(log_marginal(post) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("fit preconditions") {
    std::mt19937_64 gen(2);
    const RowMatrix z = oracle::gaussian_matrix(gen, 5, 2);
    CHECK_THROWS_AS(fit(z, Vector::Ones(5), Bandwidth(1.0)), ConfigError);
    CHECK_THROWS_AS(fit(z.topRows(1), Vector::Zero(1), Bandwidth(1.0)), ConfigError);
    CHECK_THROWS_AS(fit(z, Vector::Zero(4), Bandwidth(1.0)), DimensionError);
}

TEST_CASE("identity kernel: mean y/2 and scale b/n") {
    RowMatrix z(4, 1);
    z << 0, 100, 200, 300;
    Vector y(4);
    y << 1, -2, 3, -2;
    const GpPosterior post = fit(z, y, Bandwidth(1.0));
    const PosteriorMu mu = posterior_mu(post);
    CHECK((mu.mean - y / 2).cwiseAbs().maxCoeff() < 1e-15);
    const Matrix expected = (2.0 * post.b() / 4.0) * 0.5 * Matrix::Identity(4, 4);
    CHECK((mu.scale - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("all-ones kernel with opposite responses has zero mean") {
    RowMatrix z(2, 1);
    z << 0.0, 1e-9;
    Vector y(2);
    y << 1.5, -1.5;
    const GpPosterior post = fit(z, y, Bandwidth(1e-6));
    const PosteriorMu mu = posterior_mu(post);
    CHECK(mu.mean.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("far-away test point gets prior-plus-noise width") {
    std::mt19937_64 gen(3);
    const RowMatrix z = oracle::gaussian_matrix(gen, 6, 2);
    const Vector y = oracle::centered(oracle::gaussian_vector(gen, 6));
    const GpPosterior post = fit(z, y, Bandwidth(1.0));
    RowMatrix far(1, 2);
    far << 1e3, 1e3;
    const PredictiveDistribution pd = predict(post, far);
    CHECK(pd.locations[0] == 0.0);
    CHECK(pd.scales[0] * pd.scales[0] == doctest::Approx(2.0 * post.b() / 6.0 * 2.0).epsilon(1e-14));
    CHECK(pd.df == 6);
}

TEST_CASE("exact posterior, predictive and marginal match the dense oracle") {
    std::mt19937_64 gen(4);
    for (int rep = 0; rep < 50; ++rep) {
        std::uniform_int_distribution<Index> nd(2, 30), md(1, 8);
        const Instance in = random_instance(gen, nd(gen), md(gen), 4);
        CAPTURE(rep);
        const GpPosterior post = fit(in.z, in.y, Bandwidth(in.lambda));
        const oracle::Exact o = oracle::exact(in.z, in.y, in.lambda, in.test);
        const PosteriorMu mu = posterior_mu(post);
        const PredictiveDistribution pd = predict(post, in.test, true);
        CHECK(oracle::rel_err(post.b(), o.b) < 1e-9);
        CHECK(oracle::rel_err(mu.mean, o.post_mean) < 1e-6);
        CHECK(oracle::rel_err(mu.scale, o.post_scale) < 1e-6);
        CHECK(oracle::rel_err(pd.locations, o.pred_loc) < 1e-8);
        CHECK(oracle::rel_err(pd.scales, sqrt_diag(o.pred_scale)) < 1e-8);
        CHECK(oracle::rel_err(*pd.full_scale, o.pred_scale) < 1e-8);
        CHECK(oracle::rel_err(log_marginal(post), o.log_ml) < 1e-9);
    }
}

TEST_CASE("posterior mean identity K(K+I)^-1 = I - (K+I)^-1") {
    std::mt19937_64 gen(5);
    for (int rep = 0; rep < 10; ++rep) {
        const Instance in = random_instance(gen, 10, 3, 1);
        const oracle::LMatrix k = oracle::kernel(in.z, in.lambda);
        const oracle::LMatrix a = oracle::inverse(k + oracle::eye(10));
        CHECK(((k * a) - (oracle::eye(10) - a)).cwiseAbs().maxCoeff() < 1e-10L);
        const oracle::LMatrix lit = oracle::inverse(oracle::eye(10) + oracle::inverse(k + 1e-10L * oracle::eye(10)));
        CHECK((lit - k * a).cwiseAbs().maxCoeff() < 1e-8L);
    }
}

TEST_CASE("log marginal homogeneity under y -> 2y") {
    std::mt19937_64 gen(6);
    const Instance in = random_instance(gen, 12, 3, 1);
    const double l1 = log_marginal(fit(in.z, in.y, Bandwidth(in.lambda)));
    const double l2 = log_marginal(fit(in.z, (2.0 * in.y).eval(), Bandwidth(in.lambda)));
    CHECK(l2 - l1 == doctest::Approx(-12.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("predictive scale respects the noise floor and is PSD") {
    std::mt19937_64 gen(7);
    for (int rep = 0; rep < 10; ++rep) {
        const Instance in = random_instance(gen, 15, 3, 6);
        const GpPosterior post = fit(in.z, in.y, Bandwidth(in.lambda));
        const PredictiveDistribution pd = predict(post, in.test, true);
        const double floor = 2.0 * post.b() / 15.0;
        CHECK((pd.scales.array().square() >= floor * (1.0 - 1e-12)).all());
        const Eigen::SelfAdjointEigenSolver<Matrix> es(*pd.full_scale, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8);
        CHECK((*pd.full_scale - pd.full_scale->transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("predictive location is linear in y") {
    std::mt19937_64 gen(8);
    const Instance in = random_instance(gen, 10, 2, 3);
    const Vector y2 = oracle::centered(oracle::gaussian_vector(gen, 10));
    const Bandwidth lam(in.lambda);
    const Vector l1 = predict(fit(in.z, in.y, lam), in.test).locations;
    const Vector l2 = predict(fit(in.z, y2, lam), in.test).locations;
    const Vector l3 = predict(fit(in.z, (3.0 * in.y - 2.0 * y2).eval(), lam), in.test).locations;
    CHECK((l3 - (3.0 * l1 - 2.0 * l2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("99% interval strictly wider than 95%") {
    std::mt19937_64 gen(9);
    const Instance in = random_instance(gen, 10, 2, 5);
    const PredictiveDistribution pd = predict(fit(in.z, in.y, Bandwidth(in.lambda)), in.test);
    const boost::math::students_t t(static_cast<double>(pd.df));
    const double q95 = boost::math::quantile(t, 0.975);
    const double q99 = boost::math::quantile(t, 0.995);
    for (Index i = 0; i < 5; ++i) CHECK(q99 * pd.scales[i] > q95 * pd.scales[i]);
}

TEST_CASE("exact results are invariant under reordering of training points") {
    std::mt19937_64 gen(10);
    const Instance in = random_instance(gen, 12, 3, 3);
    std::vector<Index> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    RowMatrix zp(12, 3);
    Vector yp(12);
    for (Index i = 0; i < 12; ++i) {
        zp.row(i) = in.z.row(perm[static_cast<std::size_t>(i)]);
        yp[i] = in.y[perm[static_cast<std::size_t>(i)]];
    }
    const GpPosterior a = fit(in.z, in.y, Bandwidth(in.lambda));
    const GpPosterior b = fit(zp, yp, Bandwidth(in.lambda));
    CHECK(log_marginal(a) == doctest::Approx(log_marginal(b)).epsilon(1e-12));
    const PosteriorMu ma = posterior_mu(a);
    const PosteriorMu mb = posterior_mu(b);
    for (Index i = 0; i < 12; ++i) CHECK(std::abs(mb.mean[i] - ma.mean[perm[static_cast<std::size_t>(i)]]) < 1e-12);
    CHECK((predict(a, in.test).locations - predict(b, in.test).locations).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((predict(a, in.test).scales - predict(b, in.test).scales).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("restore reproduces predictions bit for bit") {
    std::mt19937_64 gen(11);
    const Instance in = random_instance(gen, 20, 3, 5);
    const GpPosterior post = fit(in.z, in.y, Bandwidth(in.lambda));
    const GpPosterior back = GpPosterior::restore(post.train(), post.bandwidth(), post.alpha(), post.quad());
    const auto a = predict(post, in.test);
    const auto b = predict(back, in.test);
    CHECK(a.locations == b.locations);
    CHECK(a.scales == b.scales);
    CHECK(log_marginal(post) == log_marginal(back));
}

TEST_CASE("test dimension mismatch is rejected") {
    std::mt19937_64 gen(12);
    const Instance in = random_instance(gen, 6, 3, 2);
    const GpPosterior post = fit(in.z, in.y, Bandwidth(in.lambda));
    CHECK_THROWS_AS(predict(post, oracle::gaussian_matrix(gen, 2, 4)), DimensionError);
}

// ---------------------------------------------------------------- low rank

TEST_CASE("SWM solve special cases") {
    std::mt19937_64 gen(20);
    const Vector h = (oracle::gaussian_vector(gen, 7).array().abs() + 1.0).matrix();
    const Vector rhs = oracle::gaussian_vector(gen, 7);
    const SwmSolver zero(h, Matrix::Zero(7, 3));
    CHECK((zero.solve(rhs) - rhs.cwiseQuotient(h)).cwiseAbs().maxCoeff() < 1e-15);
    // V V' = I with h = 1 gives rhs / 2.
    const SwmSolver half(Vector::Ones(7), Matrix::Identity(7, 7));
    CHECK((half.solve(rhs) - rhs / 2.0).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("SWM solve and determinant match dense inversion") {
    std::mt19937_64 gen(21);
    for (int rep = 0; rep < 10; ++rep) {
        const Index n = 30, r = 6;
        const Vector h = (oracle::gaussian_vector(gen, n).array().abs() + 1.0).matrix();
        const RowMatrix u = oracle::gaussian_matrix(gen, n, r);
        const RowMatrix g = oracle::gaussian_matrix(gen, r, r);
        const Matrix c = g * g.transpose() + Matrix::Identity(r, r);
        const Matrix rhs = oracle::gaussian_matrix(gen, n, 2);
        const Matrix cinv = c.inverse();
        const Eigen::LLT<Matrix> cinv_llt(cinv);
        const Matrix got = swm_solve(h, u, cinv_llt, rhs);
        const oracle::LMatrix dense =
            oracle::LMatrix(h.cast<long double>().asDiagonal()) + u.cast<long double>() * c.cast<long double>() * u.transpose().cast<long double>();
        const oracle::LMatrix want = oracle::inverse(dense) * rhs.cast<long double>();
        CHECK(oracle::rel_err(got, want) < 1e-9);
        // Same operator through the V form: V = U L with L L' = C.
        const Matrix v = u * Eigen::LLT<Matrix>(c).matrixL().toDenseMatrix();
        const SwmSolver solver(h, v);
        CHECK(oracle::rel_err(solver.solve(rhs), want) < 1e-9);
        CHECK(oracle::rel_err(solver.logdet(), oracle::logdet(dense)) < 1e-10);
    }
}

TEST_CASE("identity sample map reduces low rank to exact") {
    std::mt19937_64 gen(22);
    for (int rep = 0; rep < 20; ++rep) {
        std::uniform_int_distribution<Index> nd(3, 25);
        const Instance in = random_instance(gen, nd(gen), 3, 4);
        const Bandwidth lam(in.lambda);
        const GpPosterior ex = fit(in.z, in.y, lam);
        const LowRankPosterior lr = fit_lowrank(in.z, in.y, lam, SampleMap::identity(in.z.rows()));
        CHECK(oracle::rel_err(lr.b(), ex.b()) < 1e-8);
        CHECK((lr.h().array() - 1.0).abs().maxCoeff() < 1e-8);
        const LowRankMu lmu = posterior_mu_lowrank(lr);
        const PosteriorMu emu = posterior_mu(ex);
        CHECK(oracle::rel_err(lmu.mean, emu.mean) < 1e-8);
        CHECK(oracle::rel_err(lmu.scale_diagonal, emu.scale.diagonal()) < 1e-8);
        const auto pl = predict_lowrank(lr, in.test);
        const auto pe = predict(ex, in.test);
        CHECK(oracle::rel_err(pl.locations, pe.locations) < 1e-8);
        CHECK(oracle::rel_err(pl.scales, pe.scales) < 1e-8);
        CHECK(std::abs(log_marginal_lowrank(lr) - log_marginal(ex)) < 1e-8);
    }
}

TEST_CASE("low-rank quantities match the literal dense formulas") {
    std::mt19937_64 gen(23);
    for (int rep = 0; rep < 50; ++rep) {
        std::uniform_int_distribution<Index> nd(15, 60), pd_(2, 12);
        const Index n = nd(gen);
        const Index r = std::min<Index>(pd_(gen), n);
        const Instance in = random_instance(gen, n, 3, 5);
        CAPTURE(rep);
        CAPTURE(n);
        CAPTURE(r);
        const SampleMap phi = SampleMap::gaussian(r, n, 100 + static_cast<std::uint64_t>(rep));
        const LowRankPosterior post = fit_lowrank(in.z, in.y, Bandwidth(in.lambda), phi);
        REQUIRE(post.ridge() == 0.0);
        const oracle::LowRank o = oracle::lowrank(in.z, in.y, in.lambda, phi.entries(), in.test);
        const LowRankMu mu = posterior_mu_lowrank(post);
        const PredictiveDistribution pd = predict_lowrank(post, in.test, true);
        CHECK(oracle::rel_err(post.b(), o.b) < 1e-5);
        CHECK(oracle::rel_err(post.h(), o.h1) < 1e-5);
        CHECK(oracle::rel_err(mu.mean, o.m_rgp) < 1e-5);
        CHECK(oracle::rel_err(mu.scale_diagonal, o.sigma_diag) < 1e-5);
        CHECK(oracle::rel_err(pd.locations, o.pred_loc) < 1e-5);
        CHECK(oracle::rel_err(pd.scales, sqrt_diag(o.pred_scale)) < 1e-5);
        CHECK(oracle::rel_err(*pd.full_scale, o.pred_scale) < 1e-5);
        CHECK(oracle::rel_err(log_marginal_lowrank(post), o.log_ml) < 1e-7);
    }
}

TEST_CASE("Nystrom identity H2 K = U C U' and H1 bounds") {
    std::mt19937_64 gen(24);
    for (int rep = 0; rep < 10; ++rep) {
        const Instance in = random_instance(gen, 30, 3, 1);
        const SampleMap phi = SampleMap::gaussian(6, 30, 300 + static_cast<std::uint64_t>(rep));
        const LowRankPosterior post = fit_lowrank(in.z, in.y, Bandwidth(in.lambda), phi);
        const oracle::LMatrix k = oracle::kernel(in.z, in.lambda);
        const oracle::LMatrix ph = oracle::widen(phi.entries());
        const oracle::LMatrix c = oracle::inverse(ph * k * ph.transpose());
        const oracle::LMatrix h2k = k * ph.transpose() * c * ph * k;
        const Matrix vvt = post.v() * post.v().transpose();
        CHECK((vvt.cast<long double>() - h2k).cwiseAbs().maxCoeff() < 1e-9L);
        const oracle::LMatrix u = oracle::widen(RowMatrix(post.u()));
        CHECK((u * c * u.transpose() - h2k).cwiseAbs().maxCoeff() < 1e-9L);
        CHECK((post.h().array() >= 1.0).all());
        CHECK((post.h().array() <= 2.0).all());
    }
}

TEST_CASE("push-through identity against the dense oracle") {
    std::mt19937_64 gen(25);
    const Instance in = random_instance(gen, 40, 3, 1);
    const SampleMap phi = SampleMap::gaussian(8, 40, 7);
    const oracle::LMatrix k = oracle::kernel(in.z, in.lambda);
    const oracle::LMatrix ph = oracle::widen(phi.entries());
    const oracle::LMatrix c = oracle::inverse(ph * k * ph.transpose());
    const oracle::LMatrix h2 = k * ph.transpose() * c * ph;
    oracle::LMatrix h1 = oracle::LMatrix::Zero(40, 40);
    const oracle::LMatrix ny = k * ph.transpose() * c * ph * k;
    for (Index i = 0; i < 40; ++i) h1(i, i) = 1.0L + k(i, i) - ny(i, i);
    const oracle::LMatrix lhs = oracle::inverse(h2.transpose() * oracle::inverse(h1) * h2 +
                                                oracle::inverse(k + 1e-8L * oracle::eye(40))) *
                                h2.transpose() * oracle::inverse(h1);
    const oracle::LMatrix rhs = k * h2.transpose() * oracle::inverse(h2 * k * h2.transpose() + h1);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-5L);
    CHECK((h2 * k * h2.transpose() - ny).cwiseAbs().maxCoeff() < 1e-9L);
}

TEST_CASE("low-rank far-away point and homogeneity") {
    std::mt19937_64 gen(26);
    const Instance in = random_instance(gen, 40, 3, 1);
    const SampleMap phi = SampleMap::gaussian(8, 40, 3);
    const LowRankPosterior post = fit_lowrank(in.z, in.y, Bandwidth(in.lambda), phi);
    RowMatrix far(1, 3);
    far << 1e3, 1e3, 1e3;
    const auto pd = predict_lowrank(post, far);
    CHECK(pd.locations[0] == 0.0);
    CHECK(pd.scales[0] * pd.scales[0] == doctest::Approx(2.0 * post.b() / 40.0 * 2.0).epsilon(1e-14));
    const LowRankPosterior twice = fit_lowrank(in.z, (2.0 * in.y).eval(), Bandwidth(in.lambda), phi);
    CHECK(log_marginal_lowrank(twice) - log_marginal_lowrank(post) ==
          doctest::Approx(-40.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("two far-apart points: dense check") {
    RowMatrix z(2, 1);
    z << 0.0, 50.0;
    Vector y(2);
    y << 1.0, -1.0;
    const SampleMap phi = SampleMap::gaussian(2, 2, 9);
    const LowRankPosterior post = fit_lowrank(z, y, Bandwidth(1.0), phi);
    const oracle::LowRank o = oracle::lowrank(z, y, 1.0, phi.entries(), z);
    CHECK(oracle::rel_err(post.b(), o.b) < 1e-10);
    CHECK(oracle::rel_err(posterior_mu_lowrank(post).mean, o.m_rgp) < 1e-6);
}

TEST_CASE("restore reproduces low-rank predictions bit for bit") {
    std::mt19937_64 gen(27);
    const Instance in = random_instance(gen, 50, 3, 4);
    const SampleMap phi = SampleMap::gaussian(10, 50, 5);
    const LowRankPosterior post = fit_lowrank(in.z, in.y, Bandwidth(in.lambda), phi);
    const LowRankPosterior back =
        LowRankPosterior::restore(post.train(), post.bandwidth(), phi, JitterPolicy{}, post.alpha(), post.quad());
    const auto a = predict_lowrank(post, in.test);
    const auto b = predict_lowrank(back, in.test);
    CHECK(a.locations == b.locations);
    CHECK(a.scales == b.scales);
    CHECK(log_marginal_lowrank(post) == log_marginal_lowrank(back));
}

TEST_CASE("jitter escalates on a singular core and fails past the limit") {
    // Duplicated points make Phi K Phi' rank deficient when m_phi exceeds the
    // number of distinct points.
    RowMatrix z(8, 1);
    z << 0, 0, 0, 0, 1, 1, 1, 1;
    Vector y(8);
    y << 1, -1, 2, -2, 1, -1, 2, -2;
    const SampleMap phi = SampleMap::gaussian(4, 8, 1);
    const LowRankPosterior post = fit_lowrank(z, y, Bandwidth(1.0), phi);
    CHECK(post.ridge() > 0.0);
    CHECK(std::isfinite(log_marginal_lowrank(post)));
    CHECK_THROWS_AS(fit_lowrank(z, y, Bandwidth(1.0), phi, JitterPolicy{1e-30, 1e-29, 10.0}), NumericalError);
}

TEST_CASE("released posteriors refuse to predict until restored") {
    std::mt19937_64 gen(31);
    const Instance in = random_instance(gen, 20, 3, 4);
    const Bandwidth lam(in.lambda);
    GpPosterior ex = fit(in.z, in.y, lam);
    const auto before = predict(ex, in.test);
    ex.release();
    CHECK(ex.released());
    CHECK_THROWS_AS(predict(ex, in.test), ConfigError);
    CHECK_THROWS_AS(posterior_mu(ex), ConfigError);
    const GpPosterior back = GpPosterior::restore(ex.train(), lam, ex.alpha(), ex.quad());
    CHECK(predict(back, in.test).scales == before.scales);

    const SampleMap phi = SampleMap::gaussian(6, 20, 3);
    LowRankPosterior lr = fit_lowrank(in.z, in.y, lam, phi);
    const auto lr_before = predict_lowrank(lr, in.test);
    lr.release();
    CHECK(lr.released());
    CHECK_THROWS_AS(predict_lowrank(lr, in.test), ConfigError);
    const LowRankPosterior lr_back = LowRankPosterior::restore(lr.train(), lam, phi, {}, lr.alpha(), lr.quad());
    CHECK(predict_lowrank(lr_back, in.test).scales == lr_before.scales);
    CHECK(GpPosterior::stored(in.z, lam, ex.alpha(), 1.0).released());
}
