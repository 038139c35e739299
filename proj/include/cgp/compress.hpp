#pragma once

// Random compression maps: the feature map Psi (m x p, Gaussian draws with
// orthonormalized rows) and the sample map Phi (m_phi x n, raw Gaussian).

#include "cgp/matrix.hpp"

#include <cstdint>

namespace cgp {

enum class ProjectionKind { feature, sample };

struct ProjectionSpec {
    ProjectionKind kind = ProjectionKind::feature;
    Index rows = 1;
    Index cols = 1;
    std::uint64_t seed = 0;

    friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

class ProjectionMatrix {
public:
    ProjectionMatrix(ProjectionSpec spec, RowMatrix entries, int redraws)
        : spec_(spec), entries_(std::move(entries)), redraws_(redraws) {}

    const ProjectionSpec& spec() const noexcept { return spec_; }
    const RowMatrix& entries() const noexcept { return entries_; }
    Index rows() const noexcept { return entries_.rows(); }
    Index cols() const noexcept { return entries_.cols(); }
    /// Number of rows regenerated with a perturbed sub-seed because
    /// orthogonalization found them (numerically) dependent.
    int redraws() const noexcept { return redraws_; }

private:
    ProjectionSpec spec_;
    RowMatrix entries_;
    int redraws_ = 0;
};

/// Deterministic in spec. Feature kind: i.i.d. N(0,1) entries, rows
/// orthonormalized by modified Gram-Schmidt with selective
/// reorthogonalization. Sample kind: raw N(0,1) entries.
ProjectionMatrix generate(const ProjectionSpec& spec);

/// Row i of the result is P * x_i, i.e. X * P^T.
RowMatrix apply(const ProjectionMatrix& p, const RowMatrix& x);

struct DistortionResult {
    double fraction = 1.0;
    std::size_t pairs = 0;     // pairs with nonzero original distance
    std::size_t satisfied = 0;
    bool zero_pairs = false;   // no eligible pair; fraction is vacuously 1
};

/// Fraction of distinct row pairs with
/// (1-kappa) sqrt(m/p) |xi-xj| < |P xi - P xj| < (1+kappa) sqrt(m/p) |xi-xj|.
DistortionResult distortion_check(const ProjectionMatrix& p, const RowMatrix& x, double kappa);

} // namespace cgp
