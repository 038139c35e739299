#include "cgp/lowrank_gp.hpp"

#include "cgp/errors.hpp"
#include "cgp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cgp {
namespace {

constexpr Index kBlockRows = 256;
// Cholesky pivots below this fraction of the mean diagonal are roundoff, not
// curvature; such a factor is treated as a failure and the ridge escalates.
constexpr double kPivotFloor = 1e-12;
constexpr double kScaleFloor = 1e-12;

bool usable(const Eigen::LLT<Matrix>& llt, double mean_diag) {
    if (llt.info() != Eigen::Success) return false;
    const double min_pivot = llt.matrixLLT().diagonal().array().square().minCoeff();
    return min_pivot > kPivotFloor * mean_diag;
}

// U = K Phi', assembled one block of Gram rows at a time.
Matrix kernel_times_phi(const RowMatrix& z, Bandwidth lambda, const SampleMap& phi) {
    if (phi.is_identity()) return gram(z, lambda);
    const Index n = z.rows();
    Matrix u(n, phi.rank());
    const auto phi_t = phi.entries().transpose();
    for (Index first = 0; first < n; first += kBlockRows) {
        const Index count = std::min(kBlockRows, n - first);
        const Matrix block = gram_rows(z, first, count, lambda);
        u.middleRows(first, count).noalias() = block * phi_t;
    }
    return u;
}

} // namespace

SwmSolver::SwmSolver(Vector h, Matrix v) : h_(std::move(h)), v_(std::move(v)) {
    if (h_.size() != v_.rows()) throw DimensionError("swm: diagonal and low-rank factor sizes differ");
    if ((h_.array() <= 0.0).any()) throw NumericalError("swm: diagonal must be positive");
    hinv_v_ = h_.cwiseInverse().asDiagonal() * v_;
    Matrix core = v_.transpose() * hinv_v_;
    core = 0.5 * (core + core.transpose()).eval();
    core.diagonal().array() += 1.0;
    core_.compute(core);
    if (core_.info() != Eigen::Success) throw NumericalError("swm: core matrix is singular");
    logdet_ = h_.array().log().sum() + 2.0 * core_.matrixLLT().diagonal().array().log().sum();
}

Vector SwmSolver::solve(const Vector& rhs) const {
    if (rhs.size() != h_.size()) throw DimensionError("swm: right-hand side has the wrong length");
    Vector x = rhs.cwiseQuotient(h_);
    x.noalias() -= hinv_v_ * core_.solve(v_.transpose() * x);
    return x;
}

Matrix SwmSolver::solve(const Matrix& rhs) const {
    if (rhs.rows() != h_.size()) throw DimensionError("swm: right-hand side has the wrong row count");
    Matrix x = h_.cwiseInverse().asDiagonal() * rhs;
    x.noalias() -= hinv_v_ * core_.solve(v_.transpose() * x);
    return x;
}

Matrix swm_solve(const Vector& h, const Matrix& u, const Eigen::LLT<Matrix>& c_inverse, const Matrix& rhs) {
    if (u.rows() != h.size() || c_inverse.rows() != u.cols()) throw DimensionError("swm_solve: inconsistent sizes");
    if (c_inverse.info() != Eigen::Success) throw NumericalError("swm_solve: core factorization is not valid");
    Matrix v = c_inverse.matrixL().solve(u.transpose()).transpose();
    return SwmSolver(h, std::move(v)).solve(rhs);
}

SampleMap SampleMap::identity(Index n) { return SampleMap(n, std::nullopt); }

SampleMap SampleMap::gaussian(Index rows, Index n, std::uint64_t seed) {
    return SampleMap(n, generate(ProjectionSpec{ProjectionKind::sample, rows, n, seed}));
}

const RowMatrix& SampleMap::entries() const {
    if (!phi_) throw ConfigError("identity sample map has no stored entries");
    return phi_->entries();
}

void LowRankPosterior::build(const SampleMap& phi, const JitterPolicy& jitter) {
    if (phi.samples() != train_.rows()) {
        throw DimensionError("fit_lowrank: Phi has " + std::to_string(phi.samples()) + " columns for " +
                             std::to_string(train_.rows()) + " samples");
    }
    if (phi.rank() > train_.rows()) throw DimensionError("fit_lowrank: Phi has more rows than samples");
    u_ = kernel_times_phi(train_, lambda_, phi);
    Matrix core = phi.is_identity() ? u_ : Matrix(phi.entries() * u_);
    core = 0.5 * (core + core.transpose()).eval();
    const double mean_diag = core.diagonal().mean();
    ridge_ = 0.0;
    core_.compute(core);
    for (double rel = jitter.initial; !usable(core_, mean_diag); rel *= jitter.factor) {
        if (rel > jitter.max * (1.0 + 1e-9)) {
            std::ostringstream msg;
            msg << "Phi K Phi' is not positive definite after ridge " << ridge_ << " (rank " << core.rows()
                << ", lambda " << lambda_.value() << ")";
            throw NumericalError(msg.str());
        }
        ridge_ = rel * mean_diag;
        Matrix ridged = core;
        ridged.diagonal().array() += ridge_;
        core_.compute(ridged);
    }
    Matrix v = core_.matrixL().solve(u_.transpose()).transpose();
    Vector h(v.rows());
    for (Index i = 0; i < v.rows(); ++i) h[i] = 1.0 + std::max(0.0, 1.0 - v.row(i).squaredNorm());
    solver_.emplace(std::move(h), std::move(v));
}

LowRankPosterior fit_lowrank(const RowMatrix& z, const Vector& y, Bandwidth lambda, const SampleMap& phi,
                             const JitterPolicy& jitter) {
    if (z.rows() != y.size()) throw DimensionError("fit_lowrank: design rows and response length differ");
    if (z.rows() < 1) throw DimensionError("fit_lowrank: empty training set");
    LowRankPosterior post(z, lambda);
    post.build(phi, jitter);
    post.alpha_ = post.solver_->solve(y);
    post.quad_ = std::max(0.0, y.dot(post.alpha_));
    return post;
}

LowRankPosterior LowRankPosterior::restore(RowMatrix train, Bandwidth lambda, const SampleMap& phi,
                                           const JitterPolicy& jitter, Vector alpha, double quad) {
    if (alpha.size() != train.rows()) throw DataError("stored solve vector does not match design rows");
    LowRankPosterior post(std::move(train), lambda);
    post.build(phi, jitter);
    post.alpha_ = std::move(alpha);
    post.quad_ = quad;
    return post;
}

LowRankPosterior LowRankPosterior::stored(RowMatrix train, Bandwidth lambda, Vector alpha, double quad) {
    if (alpha.size() != train.rows()) throw DataError("stored solve vector does not match design rows");
    LowRankPosterior post(std::move(train), lambda);
    post.alpha_ = std::move(alpha);
    post.quad_ = quad;
    return post;
}

void LowRankPosterior::release() noexcept {
    u_ = Matrix();
    core_ = Eigen::LLT<Matrix>();
    solver_.reset();
}

namespace {

void require_solver(const LowRankPosterior& post) {
    if (post.released()) throw ConfigError("low-rank posterior has no solver; restore it before use");
}

} // namespace

LowRankMu posterior_mu_lowrank(const LowRankPosterior& post) {
    require_solver(post);
    const Matrix& v = post.v();
    LowRankMu out;
    out.mean = v * (v.transpose() * post.alpha());
    // [H2' H1^-1 H2 + K^-1]^-1 = K - V V' W V V'; only the diagonal is formed.
    const Matrix g = v.transpose() * post.solver().solve(v);
    const Matrix vg = v * g;
    const double s = 2.0 * post.b() / static_cast<double>(post.n());
    out.scale_diagonal.resize(post.n());
    for (Index i = 0; i < post.n(); ++i) out.scale_diagonal[i] = s * (1.0 - vg.row(i).dot(v.row(i)));
    return out;
}

PredictiveDistribution predict_lowrank(const LowRankPosterior& post, const RowMatrix& test, bool want_full) {
    require_solver(post);
    if (test.cols() != post.train().cols()) {
        throw DimensionError("predict_lowrank: test design has " + std::to_string(test.cols()) +
                             " columns, model expects " + std::to_string(post.train().cols()));
    }
    const double s = 2.0 * post.b() / static_cast<double>(post.n());
    const Matrix kx = cross_gram(test, post.train(), post.bandwidth());
    const Matrix wk = post.solver().solve(Matrix(kx.transpose())); // n x n_pred
    PredictiveDistribution out;
    out.df = post.n();
    out.locations = kx * post.alpha();
    out.scales.resize(test.rows());
    for (Index i = 0; i < test.rows(); ++i) {
        // The Nystrom-corrected W can make the latent term negative; only the
        // total is floored so the result still follows the dense formula.
        const double total = 2.0 - kx.row(i).dot(wk.col(i));
        out.scales[i] = std::sqrt(s * std::max(total, kScaleFloor));
    }
    if (want_full) {
        Matrix full = gram(test, post.bandwidth());
        full.noalias() -= kx * wk;
        full.diagonal().array() += 1.0;
        full = 0.5 * s * (full + full.transpose()).eval();
        out.full_scale = std::move(full);
    }
    return out;
}

double log_marginal_lowrank(const LowRankPosterior& post) {
    return log_marginal_from(post.n(), post.logdet(), post.quad());
}

} // namespace cgp
