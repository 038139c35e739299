#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and
// optional AVX2 (x86-64) / NEON (aarch64) versions; one table is selected at
// runtime from CPU capabilities, overridable with CGP_SIMD=scalar|avx2|neon.

#include <cstddef>
#include <span>
#include <string_view>

namespace cgp::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    double (*norm_squared)(const double* a, std::size_t n);
    // out[i] = squared_distance(point, rows + i * stride, dim) for i < count
    void (*squared_distances_to)(const double* point, const double* rows, std::size_t count,
                                 std::size_t dim, std::size_t stride, double* out);
};

bool supported(Isa isa) noexcept;
const KernelTable& table(Isa isa);

/// Table used by the free functions below.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;
/// Throws ConfigError when the ISA is not available on this CPU.
void set_active(Isa isa);

std::string_view name(Isa isa) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    return active().squared_distance(a.data(), b.data(), a.size());
}

inline double norm_squared(std::span<const double> a) {
    return active().norm_squared(a.data(), a.size());
}

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
} // namespace detail

} // namespace cgp::simd
