#pragma once

#include <Eigen/Dense>

#include <span>

namespace cgp {

/// Row-major dense matrix; data sets and projections store one point per row
/// so per-row kernels see contiguous memory.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline std::span<const double> row_span(const RowMatrix& m, Index i) {
    return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<double> row_span(RowMatrix& m, Index i) {
    return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

} // namespace cgp
