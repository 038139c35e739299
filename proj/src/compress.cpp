#include "cgp/compress.hpp"

#include "cgp/errors.hpp"
#include "cgp/rng.hpp"
#include "cgp/simd.hpp"

#include <cmath>
#include <string>

namespace cgp {
namespace {

constexpr std::uint64_t kRedrawTag = 0x7265647261770000ULL;

std::uint64_t base_key(const ProjectionSpec& spec) {
    return derive_key({spec.seed, static_cast<std::uint64_t>(spec.kind),
                       static_cast<std::uint64_t>(spec.rows), static_cast<std::uint64_t>(spec.cols)});
}

void fill_row(std::span<double> row, const CounterStream& stream, std::uint64_t offset) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = stream.normal(offset + j);
}

// Orthogonalizes row i against rows [0, i) in place. Returns the norm left
// after projection, relative to the norm before.
double orthogonalize_row(RowMatrix& q, Index i) {
    auto v = row_span(q, i);
    const double before = std::sqrt(simd::norm_squared(v));
    double norm = before;
    // A second sweep runs when the first removed most of the vector.
    for (int sweep = 0; sweep < 2; ++sweep) {
        const double start = norm;
        for (Index j = 0; j < i; ++j) {
            const auto qj = row_span(std::as_const(q), j);
            simd::axpy(-simd::dot(qj, v), qj, v);
        }
        norm = std::sqrt(simd::norm_squared(v));
        if (norm > 0.5 * start) break;
    }
    return before > 0.0 ? norm / before : 0.0;
}

} // namespace

ProjectionMatrix generate(const ProjectionSpec& spec) {
    if (spec.rows < 1 || spec.cols < 1) {
        throw DimensionError("projection needs at least one row and one column");
    }
    if (spec.kind == ProjectionKind::feature && spec.rows > spec.cols) {
        throw DimensionError("feature projection with " + std::to_string(spec.rows) +
                             " rows cannot have orthonormal rows in dimension " +
                             std::to_string(spec.cols));
    }
    const CounterStream stream(base_key(spec));
    RowMatrix entries(spec.rows, spec.cols);
    const auto cols = static_cast<std::uint64_t>(spec.cols);
    for (Index i = 0; i < spec.rows; ++i) {
        fill_row(row_span(entries, i), stream, static_cast<std::uint64_t>(i) * cols);
    }
    int redraws = 0;
    if (spec.kind == ProjectionKind::feature) {
        for (Index i = 0; i < spec.rows; ++i) {
            std::uint64_t attempt = 0;
            while (orthogonalize_row(entries, i) < 1e-10) {
                if (++attempt > 64) throw NumericalError("projection row orthogonalization keeps failing");
                ++redraws;
                const CounterStream redraw(derive_key({stream.key(), kRedrawTag, static_cast<std::uint64_t>(i), attempt}));
                fill_row(row_span(entries, i), redraw, 0);
            }
            auto v = row_span(entries, i);
            const double inv = 1.0 / std::sqrt(simd::norm_squared(v));
            for (double& e : v) e *= inv;
        }
    }
    return ProjectionMatrix(spec, std::move(entries), redraws);
}

RowMatrix apply(const ProjectionMatrix& p, const RowMatrix& x) {
    if (x.cols() != p.cols()) {
        throw DimensionError("apply: data has " + std::to_string(x.cols()) + " columns, projection expects " +
                             std::to_string(p.cols()));
    }
    RowMatrix out(x.rows(), p.rows());
    out.noalias() = x * p.entries().transpose();
    return out;
}

DistortionResult distortion_check(const ProjectionMatrix& p, const RowMatrix& x, double kappa) {
    if (!(kappa > 0.0 && kappa < 1.0)) throw ConfigError("distortion_check: kappa must lie in (0, 1)");
    const RowMatrix z = apply(p, x);
    const double scale = std::sqrt(static_cast<double>(p.rows()) / static_cast<double>(p.cols()));
    DistortionResult r;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = i + 1; j < x.rows(); ++j) {
            const double d = std::sqrt(simd::squared_distance(row_span(x, i), row_span(x, j)));
            if (d == 0.0) continue;
            const double dz = std::sqrt(simd::squared_distance(row_span(z, i), row_span(z, j)));
            ++r.pairs;
            if ((1.0 - kappa) * scale * d < dz && dz < (1.0 + kappa) * scale * d) ++r.satisfied;
        }
    }
    r.zero_pairs = r.pairs == 0;
    r.fraction = r.zero_pairs ? 1.0 : static_cast<double>(r.satisfied) / static_cast<double>(r.pairs);
    return r;
}

} // namespace cgp
