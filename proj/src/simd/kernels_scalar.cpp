#include "cgp/simd.hpp"

namespace cgp::simd::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double norm_squared(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

void squared_distances_to(const double* point, const double* rows, std::size_t count,
                          std::size_t dim, std::size_t stride, double* out) {
    for (std::size_t r = 0; r < count; ++r) out[r] = squared_distance(point, rows + r * stride, dim);
}

} // namespace

const KernelTable scalar_table{Isa::scalar, dot, axpy, squared_distance, norm_squared,
                               squared_distances_to};

} // namespace cgp::simd::detail
