#pragma once

// Conjugate GP regression on compressed features for one (Psi, lambda) member,
// in the Jeffreys limit of the normal-inverse-gamma prior:
//   mu | y ~ t_n(K(K+I)^-1 y, (2b/n) K(K+I)^-1),  sigma^2 | y ~ IG(n/2, b),
//   b = y'(K+I)^-1 y / 2.
// Everything is driven by one Cholesky factorization of K + I; K^-1 is never
// formed. Student-t matrices are scale matrices (covariance = scale * n/(n-2)).

#include "cgp/kernel.hpp"
#include "cgp/matrix.hpp"

#include <optional>

namespace cgp {

struct PredictiveDistribution {
    Index df = 0;
    Vector locations;
    Vector scales; // per-point scale, sqrt of the diagonal of the scale matrix
    std::optional<Matrix> full_scale;
};

struct PosteriorMu {
    Vector mean;
    Matrix scale;
};

class GpPosterior {
public:
    Index n() const noexcept { return train_.rows(); }
    double a() const noexcept { return 0.5 * static_cast<double>(n()); }
    double b() const noexcept { return 0.5 * quad_; }
    /// y'(K+I)^-1 y
    double quad() const noexcept { return quad_; }
    /// log det(K + I)
    double logdet() const noexcept { return logdet_; }
    /// True when y'(K+I)^-1 y == 0 (zero signal); log marginal is -inf.
    bool degenerate() const noexcept { return quad_ <= 0.0; }
    const Vector& alpha() const noexcept { return alpha_; }
    const Vector& response() const noexcept { return response_; }
    const RowMatrix& train() const noexcept { return train_; }
    Bandwidth bandwidth() const noexcept { return lambda_; }
    const Eigen::LLT<Matrix>& factor() const noexcept { return factor_; }

    /// Rebuilds a posterior from a stored (design, bandwidth, alpha, quad)
    /// record; the factorization is recomputed exactly as during fitting.
    static GpPosterior restore(RowMatrix train, Bandwidth lambda, Vector alpha, double quad);
    /// Same record without the factorization; only alpha, quad and the design
    /// are usable until it is restored.
    static GpPosterior stored(RowMatrix train, Bandwidth lambda, Vector alpha, double quad);

    /// Frees the n x n factor (and the response copy), keeping the record.
    void release() noexcept;
    bool released() const noexcept { return factor_.rows() != n(); }

private:
    friend GpPosterior fit_unchecked(const RowMatrix&, const Vector&, Bandwidth);
    GpPosterior(RowMatrix train, Bandwidth lambda) : train_(std::move(train)), lambda_(lambda) {}
    void factorize();

    RowMatrix train_;
    Bandwidth lambda_;
    Eigen::LLT<Matrix> factor_;
    Vector alpha_;
    Vector response_;
    double quad_ = 0.0;
    double logdet_ = 0.0;
};

/// Fit without the n >= 2 / centering preconditions (used for the scalar
/// sanity cases). Throws NumericalError if K + I cannot be factorized.
GpPosterior fit_unchecked(const RowMatrix& z, const Vector& y, Bandwidth lambda);

/// Requires n >= 2 and y centered (|mean| <= 1e-10 * rms).
GpPosterior fit(const RowMatrix& z, const Vector& y, Bandwidth lambda);

/// mean = K(K+I)^-1 y = y - (K+I)^-1 y, scale = (2b/n)(I - (K+I)^-1).
PosteriorMu posterior_mu(const GpPosterior& post);

/// locations = K*(K+I)^-1 y; scale matrix = (2b/n)[I + K** - K*(K+I)^-1 K*'].
PredictiveDistribution predict(const GpPosterior& post, const RowMatrix& test, bool want_full = false);

/// log P(D | M) = -1/2 logdet(K+I) + (n/2) log 2 + lgamma(n/2)
///                - (n/2) log(y'(K+I)^-1 y) - (n/2) log(2 pi).
/// Returns -infinity for a degenerate posterior.
double log_marginal(const GpPosterior& post);

/// The log marginal formula shared with the low-rank model.
double log_marginal_from(Index n, double logdet, double quad);

} // namespace cgp
