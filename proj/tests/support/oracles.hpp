#pragma once

// Brute-force reference implementations used only by tests. They evaluate the
// textbook formulas literally (explicit inverses, explicit kernels, long
// double arithmetic) and share no code with the library beyond the matrix
// types, so agreement is meaningful.

#include "cgp/matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using cgp::Index;
using cgp::RowMatrix;
using cgp::Vector;

inline LMatrix widen(const RowMatrix& m) { return m.cast<long double>(); }
inline LVector widen(const Vector& v) { return v.cast<long double>(); }
inline Vector narrow(const LVector& v) { return v.cast<double>(); }

inline long double kval(const RowMatrix& a, Index i, const RowMatrix& b, Index j, double lambda) {
    long double d2 = 0.0L;
    for (Index c = 0; c < a.cols(); ++c) {
        const long double d = static_cast<long double>(a(i, c)) - static_cast<long double>(b(j, c));
        d2 += d * d;
    }
    return std::exp(-static_cast<long double>(lambda) * d2);
}

inline LMatrix cross_kernel(const RowMatrix& a, const RowMatrix& b, double lambda) {
    LMatrix k(a.rows(), b.rows());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < b.rows(); ++j) k(i, j) = kval(a, i, b, j, lambda);
    return k;
}

inline LMatrix kernel(const RowMatrix& z, double lambda) { return cross_kernel(z, z, lambda); }

inline LMatrix inverse(const LMatrix& a) { return a.fullPivLu().inverse(); }

inline long double logdet(const LMatrix& a) {
    const auto lu = a.fullPivLu();
    long double s = 0.0L;
    const LMatrix& u = lu.matrixLU();
    for (Index i = 0; i < a.rows(); ++i) s += std::log(std::abs(u(i, i)));
    return s;
}

inline LMatrix eye(Index n) { return LMatrix::Identity(n, n); }

/// log P(D|M) = -1/2 logdet(A) + (n/2) log 2 + lgamma(n/2) - (n/2) log(y'A^-1 y) - (n/2) log(2 pi)
inline long double log_marginal(const LMatrix& a, const LVector& y) {
    const long double n = static_cast<long double>(y.size());
    const long double quad = y.dot(inverse(a) * y);
    return -0.5L * logdet(a) + 0.5L * n * std::log(2.0L) + std::lgamma(0.5L * n) - 0.5L * n * std::log(quad) -
           0.5L * n * std::log(2.0L * std::numbers::pi_v<long double>);
}

struct Exact {
    long double b = 0.0L;
    LVector post_mean;
    LMatrix post_scale;
    LVector pred_loc;
    LMatrix pred_scale; // full scale matrix
    long double log_ml = 0.0L;
};

/// Posterior m = [I + K^-1]^-1 y and Sigma = (2b/n)[I + K^-1]^-1 with a ridge
/// on K so K^-1 exists; predictive from the (I + K)^-1 forms.
inline Exact exact(const RowMatrix& z, const Vector& y_in, double lambda, const RowMatrix& test,
                   long double ridge = 1e-10L) {
    const Index n = z.rows();
    const LVector y = widen(y_in);
    const LMatrix k = kernel(z, lambda);
    const LMatrix a = k + eye(n);
    const LMatrix ainv = inverse(a);
    Exact out;
    out.b = 0.5L * y.dot(ainv * y);
    const LMatrix inner = inverse(eye(n) + inverse(k + ridge * eye(n)));
    out.post_mean = inner * y;
    out.post_scale = (2.0L * out.b / n) * inner;
    const LMatrix kx = cross_kernel(test, z, lambda);
    const LMatrix kxx = kernel(test, lambda);
    out.pred_loc = kx * ainv * y;
    out.pred_scale = (2.0L * out.b / n) * (eye(test.rows()) + kxx - kx * ainv * kx.transpose());
    out.log_ml = log_marginal(a, y);
    return out;
}

struct LowRank {
    long double b = 0.0L;
    LVector h1;          // diagonal of H1
    LVector m_rgp;
    LVector sigma_diag;  // diagonal of Sigma_RGP
    LVector pred_loc;
    LMatrix pred_scale;
    long double log_ml = 0.0L;
};

/// Literal large-n formulas: H1 = diag(K - K Phi'(Phi K Phi')^-1 Phi K) + I,
/// H2 = K Phi'(Phi K Phi')^-1 Phi, b2 = y'(H2 K + H1)^-1 y / 2,
/// m = [H2' H1^-1 H2 + K^-1]^-1 H2' H1^-1 y, Sigma = (2 b2/n)[...]^-1,
/// predictive with W = (H2 K + H1)^-1 and b2.
inline LowRank lowrank(const RowMatrix& z, const Vector& y_in, double lambda, const RowMatrix& phi_in,
                       const RowMatrix& test, long double ridge = 1e-8L) {
    const Index n = z.rows();
    const LVector y = widen(y_in);
    const LMatrix k = kernel(z, lambda);
    const LMatrix phi = widen(phi_in);
    const LMatrix c = inverse(phi * k * phi.transpose());
    const LMatrix nystrom = k * phi.transpose() * c * phi * k;
    LMatrix h1 = LMatrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) h1(i, i) = k(i, i) - nystrom(i, i) + 1.0L;
    const LMatrix h2 = k * phi.transpose() * c * phi;
    const LMatrix a = h2 * k + h1;
    const LMatrix w = inverse(a);
    LowRank out;
    out.h1 = h1.diagonal();
    out.b = 0.5L * y.dot(w * y);
    const LMatrix h1inv = inverse(h1);
    const LMatrix inner = inverse(h2.transpose() * h1inv * h2 + inverse(k + ridge * eye(n)));
    out.m_rgp = inner * h2.transpose() * h1inv * y;
    out.sigma_diag = (2.0L * out.b / n) * inner.diagonal();
    const LMatrix kx = cross_kernel(test, z, lambda);
    const LMatrix kxx = kernel(test, lambda);
    out.pred_loc = kx * w * y;
    out.pred_scale = (2.0L * out.b / n) * (eye(test.rows()) + kxx - kx * w * kx.transpose());
    out.log_ml = log_marginal(a, y);
    return out;
}

/// exp(l_i) / sum_j exp(l_j), evaluated directly in long double.
inline std::vector<long double> softmax(const std::vector<double>& log_ml) {
    std::vector<long double> w(log_ml.size());
    long double total = 0.0L;
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp(static_cast<long double>(log_ml[i]));
    for (auto& v : w) v /= total;
    return w;
}

/// |a - b|_inf / max(|b|_inf, floor)
template <class A, class B>
double rel_err(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, double floor = 1e-300) {
    const auto diff = (a.derived().template cast<long double>() - b.derived().template cast<long double>()).cwiseAbs().maxCoeff();
    const auto scale = b.derived().template cast<long double>().cwiseAbs().maxCoeff();
    return static_cast<double>(diff / std::max<long double>(scale, floor));
}

inline double rel_err(long double a, long double b) {
    return static_cast<double>(std::abs(a - b) / std::max<long double>(std::abs(b), 1e-300L));
}

/// Test data from std::mt19937_64, independent of the library's generator.
inline RowMatrix gaussian_matrix(std::mt19937_64& gen, Index rows, Index cols, double sd = 1.0) {
    std::normal_distribution<double> nd(0.0, sd);
    RowMatrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
    return m;
}

inline Vector gaussian_vector(std::mt19937_64& gen, Index n, double sd = 1.0) {
    std::normal_distribution<double> nd(0.0, sd);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = nd(gen);
    return v;
}

inline Vector centered(Vector v) {
    v.array() -= v.mean();
    return v;
}

} // namespace oracle
