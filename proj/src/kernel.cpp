#include "cgp/kernel.hpp"

#include "cgp/errors.hpp"
#include "cgp/simd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cgp {
namespace {

Vector row_norms(const RowMatrix& z) { return z.rowwise().squaredNorm(); }

} // namespace

Bandwidth::Bandwidth(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("bandwidth must be positive and finite, got " + std::to_string(lambda));
    }
}

double kval(std::span<const double> u, std::span<const double> v, Bandwidth lambda) {
    if (u.size() != v.size()) throw DimensionError("kval: vectors differ in length");
    return std::exp(-lambda.value() * simd::squared_distance(u, v));
}

Matrix gram(const RowMatrix& z, Bandwidth lambda) {
    const Index n = z.rows();
    Matrix k = Matrix::Zero(n, n);
    k.selfadjointView<Eigen::Lower>().rankUpdate(z);
    const Vector norms = row_norms(z);
    const double lam = lambda.value();
    for (Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Index i = j + 1; i < n; ++i) {
            const double d2 = std::max(0.0, norms[i] + norms[j] - 2.0 * k(i, j));
            const double v = std::exp(-lam * d2);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Matrix cross_gram(const RowMatrix& test, const RowMatrix& train, Bandwidth lambda) {
    if (test.cols() != train.cols()) {
        throw DimensionError("cross_gram: test points have " + std::to_string(test.cols()) +
                             " coordinates, training points " + std::to_string(train.cols()));
    }
    Matrix k(test.rows(), train.rows());
    k.noalias() = test * train.transpose();
    const Vector tn = row_norms(test);
    const Vector rn = row_norms(train);
    const double lam = lambda.value();
    for (Index j = 0; j < k.cols(); ++j) {
        for (Index i = 0; i < k.rows(); ++i) {
            k(i, j) = std::exp(-lam * std::max(0.0, tn[i] + rn[j] - 2.0 * k(i, j)));
        }
    }
    return k;
}

Matrix gram_rows(const RowMatrix& z, Index first, Index count, Bandwidth lambda) {
    Matrix k = cross_gram(z.middleRows(first, count), z, lambda);
    for (Index i = 0; i < count; ++i) k(i, first + i) = 1.0;
    return k;
}

} // namespace cgp
