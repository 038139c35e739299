#pragma once

// Squared-exponential covariance exp(-lambda |u - v|^2) on compressed features.

#include "cgp/matrix.hpp"

#include <span>

namespace cgp {

/// Inverse squared length-scale; positive and finite.
class Bandwidth {
public:
    explicit Bandwidth(double lambda);
    double value() const noexcept { return lambda_; }

private:
    double lambda_;
};

double kval(std::span<const double> u, std::span<const double> v, Bandwidth lambda);

/// Symmetric n x n Gram matrix with unit diagonal. Squared distances come from
/// |u|^2 + |v|^2 - 2 u.v (clamped at 0); the lower triangle is computed and
/// mirrored so the result is symmetric bit for bit.
Matrix gram(const RowMatrix& z, Bandwidth lambda);

/// Entry (i, j) = kval(test_i, train_j).
Matrix cross_gram(const RowMatrix& test, const RowMatrix& train, Bandwidth lambda);

/// Rows [first, first + count) of gram(z, lambda), as a count x n block.
/// Matches cross_gram on those rows except that self-pairs are exactly 1.
Matrix gram_rows(const RowMatrix& z, Index first, Index count, Bandwidth lambda);

} // namespace cgp
