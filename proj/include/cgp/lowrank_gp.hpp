#pragma once

// Large-n approximation: the GP is compressed in sample space through a random
// m_phi x n Gaussian matrix Phi. With U = K Phi' and C = (Phi K Phi')^-1,
//   H2 K = U C U',  H1 = diag(K - U C U') + I,
// and every n x n solve against H1 + U C U' goes through Sherman-Woodbury-
// Morrison on an m_phi x m_phi core. No dense n x n matrix is stored or
// factorized (the Gram matrix is consumed in row blocks).

#include "cgp/compress.hpp"
#include "cgp/exact_gp.hpp"
#include "cgp/kernel.hpp"
#include "cgp/matrix.hpp"

#include <optional>

namespace cgp {

/// Ridge escalation for the core matrix Phi K Phi'. The first attempt is
/// unridged; then initial, initial*factor, ... up to max, each relative to the
/// mean diagonal of the core.
struct JitterPolicy {
    double initial = 1e-10;
    double max = 1e-6;
    double factor = 10.0;
};

/// Applies (diag(h) + V V')^-1 using the r x r core I + V' diag(h)^-1 V.
class SwmSolver {
public:
    SwmSolver(Vector h, Matrix v);

    Vector solve(const Vector& rhs) const;
    Matrix solve(const Matrix& rhs) const;
    /// log det(diag(h) + V V') = sum log h + log det(core).
    double logdet() const noexcept { return logdet_; }
    const Vector& h() const noexcept { return h_; }
    const Matrix& v() const noexcept { return v_; }

private:
    Vector h_;
    Matrix v_;
    Matrix hinv_v_;
    Eigen::LLT<Matrix> core_;
    double logdet_ = 0.0;
};

/// (diag(h) + U C U')^-1 rhs, where `c_inverse` is the Cholesky factor of C^-1.
Matrix swm_solve(const Vector& h, const Matrix& u, const Eigen::LLT<Matrix>& c_inverse, const Matrix& rhs);

/// The sample-space map Phi. Identity when m_phi >= n (exact-equivalent).
class SampleMap {
public:
    static SampleMap identity(Index n);
    static SampleMap gaussian(Index rows, Index n, std::uint64_t seed);

    bool is_identity() const noexcept { return !phi_.has_value(); }
    Index rank() const noexcept { return is_identity() ? n_ : phi_->rows(); }
    Index samples() const noexcept { return n_; }
    /// Seed used for the Gaussian entries (0 for identity).
    std::uint64_t seed() const noexcept { return is_identity() ? 0 : phi_->spec().seed; }
    const RowMatrix& entries() const; // Gaussian only

private:
    SampleMap(Index n, std::optional<ProjectionMatrix> phi) : n_(n), phi_(std::move(phi)) {}
    Index n_;
    std::optional<ProjectionMatrix> phi_;
};

class LowRankPosterior {
public:
    Index n() const noexcept { return train_.rows(); }
    Index rank() const noexcept { return u_.cols(); }
    double a() const noexcept { return 0.5 * static_cast<double>(n()); }
    /// b2 = y'(H1 + H2 K)^-1 y / 2
    double b() const noexcept { return 0.5 * quad_; }
    double quad() const noexcept { return quad_; }
    double logdet() const noexcept { return solver_->logdet(); }
    bool degenerate() const noexcept { return quad_ <= 0.0; }
    /// Ridge that was added to Phi K Phi' (0 when none was needed).
    double ridge() const noexcept { return ridge_; }

    const RowMatrix& train() const noexcept { return train_; }
    Bandwidth bandwidth() const noexcept { return lambda_; }
    /// U = K Phi'
    const Matrix& u() const noexcept { return u_; }
    /// V = U L^-T with L L' = Phi K Phi', so U C U' = V V'.
    const Matrix& v() const noexcept { return solver_->v(); }
    /// Diagonal of H1.
    const Vector& h() const noexcept { return solver_->h(); }
    const SwmSolver& solver() const noexcept { return *solver_; }
    const Eigen::LLT<Matrix>& core() const noexcept { return core_; }
    /// W y with W = (H1 + U C U')^-1.
    const Vector& alpha() const noexcept { return alpha_; }

    static LowRankPosterior restore(RowMatrix train, Bandwidth lambda, const SampleMap& phi,
                                    const JitterPolicy& jitter, Vector alpha, double quad);
    /// Same record without U, the core factor and the solver.
    static LowRankPosterior stored(RowMatrix train, Bandwidth lambda, Vector alpha, double quad);

    /// Frees U, the core factor and the solver, keeping the record.
    void release() noexcept;
    bool released() const noexcept { return !solver_.has_value(); }

private:
    friend LowRankPosterior fit_lowrank(const RowMatrix&, const Vector&, Bandwidth, const SampleMap&,
                                        const JitterPolicy&);
    LowRankPosterior(RowMatrix train, Bandwidth lambda) : train_(std::move(train)), lambda_(lambda) {}
    void build(const SampleMap& phi, const JitterPolicy& jitter);

    RowMatrix train_;
    Bandwidth lambda_;
    Matrix u_;
    Eigen::LLT<Matrix> core_;
    std::optional<SwmSolver> solver_;
    Vector alpha_;
    double quad_ = 0.0;
    double ridge_ = 0.0;
};

LowRankPosterior fit_lowrank(const RowMatrix& z, const Vector& y, Bandwidth lambda, const SampleMap& phi,
                             const JitterPolicy& jitter = {});

struct LowRankMu {
    Vector mean;           // U C U' W y
    Vector scale_diagonal; // diagonal of (2b/n)[H2' H1^-1 H2 + K^-1]^-1
};

LowRankMu posterior_mu_lowrank(const LowRankPosterior& post);

/// locations = K* W y; scale matrix = (2b2/n)[I + K** - K* W K*'].
PredictiveDistribution predict_lowrank(const LowRankPosterior& post, const RowMatrix& test,
                                       bool want_full = false);

double log_marginal_lowrank(const LowRankPosterior& post);

} // namespace cgp
