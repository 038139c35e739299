#include "cgp/exact_gp.hpp"

#include "cgp/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cgp {
namespace {

void check_centered(const Vector& y) {
    const double n = static_cast<double>(y.size());
    const double mean = y.sum() / n;
    const double rms = std::sqrt(y.squaredNorm() / n);
    if (std::abs(mean) > 1e-10 * std::max(rms, 1.0)) {
        throw ConfigError("response must be centered before fitting (mean " + std::to_string(mean) + ")");
    }
}

} // namespace

void GpPosterior::factorize() {
    Matrix k = gram(train_, lambda_);
    k.diagonal().array() += 1.0;
    factor_.compute(k);
    if (factor_.info() != Eigen::Success) {
        // K + I has eigenvalues >= 1 in exact arithmetic; report what we saw.
        Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
        std::ostringstream msg;
        msg << "Cholesky of K+I failed (n=" << train_.rows() << ", lambda=" << lambda_.value()
            << ", eigenvalue range [" << eig.eigenvalues().minCoeff() << ", " << eig.eigenvalues().maxCoeff()
            << "])";
        throw NumericalError(msg.str());
    }
    logdet_ = 2.0 * factor_.matrixLLT().diagonal().array().log().sum();
}

GpPosterior GpPosterior::restore(RowMatrix train, Bandwidth lambda, Vector alpha, double quad) {
    if (alpha.size() != train.rows()) throw DataError("stored solve vector does not match design rows");
    GpPosterior post(std::move(train), lambda);
    post.factorize();
    post.alpha_ = std::move(alpha);
    post.quad_ = quad;
    post.response_ = post.factor_.matrixL() * (post.factor_.matrixU() * post.alpha_);
    return post;
}

GpPosterior GpPosterior::stored(RowMatrix train, Bandwidth lambda, Vector alpha, double quad) {
    if (alpha.size() != train.rows()) throw DataError("stored solve vector does not match design rows");
    GpPosterior post(std::move(train), lambda);
    post.alpha_ = std::move(alpha);
    post.quad_ = quad;
    return post;
}

void GpPosterior::release() noexcept {
    factor_ = Eigen::LLT<Matrix>();
    response_ = Vector();
}

namespace {

void require_factor(const GpPosterior& post) {
    if (post.released()) throw ConfigError("exact posterior has no factorization; restore it before use");
}

} // namespace

GpPosterior fit_unchecked(const RowMatrix& z, const Vector& y, Bandwidth lambda) {
    if (z.rows() != y.size()) throw DimensionError("fit: design rows and response length differ");
    if (z.rows() < 1) throw DimensionError("fit: empty training set");
    GpPosterior post(z, lambda);
    post.factorize();
    post.alpha_ = post.factor_.solve(y);
    post.response_ = y;
    post.quad_ = std::max(0.0, y.dot(post.alpha_));
    return post;
}

GpPosterior fit(const RowMatrix& z, const Vector& y, Bandwidth lambda) {
    if (z.rows() < 2) throw DimensionError("fit: need at least two training points");
    check_centered(y);
    return fit_unchecked(z, y, lambda);
}

PosteriorMu posterior_mu(const GpPosterior& post) {
    require_factor(post);
    const Index n = post.n();
    const double s = 2.0 * post.b() / static_cast<double>(n);
    Matrix inv = post.factor().solve(Matrix::Identity(n, n));
    inv = 0.5 * (inv + inv.transpose()).eval();
    PosteriorMu out;
    out.mean = post.response() - post.alpha();
    out.scale = s * (Matrix::Identity(n, n) - inv);
    return out;
}

PredictiveDistribution predict(const GpPosterior& post, const RowMatrix& test, bool want_full) {
    require_factor(post);
    if (test.cols() != post.train().cols()) {
        throw DimensionError("predict: test design has " + std::to_string(test.cols()) +
                             " columns, model expects " + std::to_string(post.train().cols()));
    }
    const double s = 2.0 * post.b() / static_cast<double>(post.n());
    const Matrix kx = cross_gram(test, post.train(), post.bandwidth()); // n_pred x n
    PredictiveDistribution out;
    out.df = post.n();
    out.locations = kx * post.alpha();
    // L^-1 K*' so that K*(K+I)^-1 K*' = V'V.
    const Matrix v = post.factor().matrixL().solve(kx.transpose());
    const Vector explained = v.colwise().squaredNorm().transpose();
    out.scales.resize(test.rows());
    for (Index i = 0; i < test.rows(); ++i) {
        const double latent = std::max(0.0, 1.0 - explained[i]);
        out.scales[i] = std::sqrt(s * (1.0 + latent));
    }
    if (want_full) {
        Matrix full = gram(test, post.bandwidth());
        full.noalias() -= v.transpose() * v;
        full.diagonal().array() += 1.0;
        full = 0.5 * s * (full + full.transpose()).eval();
        out.full_scale = std::move(full);
    }
    return out;
}

double log_marginal_from(Index n, double logdet, double quad) {
    if (!(quad > 0.0)) return -std::numeric_limits<double>::infinity();
    const double half_n = 0.5 * static_cast<double>(n);
    return -0.5 * logdet + half_n * std::numbers::ln2 + std::lgamma(half_n) - half_n * std::log(quad) -
           half_n * std::log(2.0 * std::numbers::pi);
}

double log_marginal(const GpPosterior& post) { return log_marginal_from(post.n(), post.logdet(), post.quad()); }

} // namespace cgp
