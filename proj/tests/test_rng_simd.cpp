#include "cgp/compress.hpp"
#include "cgp/errors.hpp"
#include "cgp/kernel.hpp"
#include "cgp/rng.hpp"
#include "cgp/simd.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace cgp;

namespace {

struct IsaGuard {
    simd::Isa saved = simd::active_isa();
    ~IsaGuard() { simd::set_active(saved); }
};

std::vector<simd::Isa> vector_isas() {
    std::vector<simd::Isa> out;
    for (auto isa : {simd::Isa::avx2, simd::Isa::neon})
        if (simd::supported(isa)) out.push_back(isa);
    return out;
}

double close_rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace

TEST_CASE("counter stream is a pure function of key and index") {
    const CounterStream s(42);
    const CounterStream t(42);
    for (std::uint64_t i = 0; i < 100; ++i) {
        CHECK(s.bits(i) == t.bits(i));
        CHECK(s.normal(i) == t.normal(i));
    }
    CHECK(CounterStream(43).bits(0) != s.bits(0));
}

TEST_CASE("uniform and normal draws have the right moments") {
    const CounterStream s(7);
    const int n = 200000;
    double mu = 0, mu2 = 0, umin = 1, umax = 0;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform(static_cast<std::uint64_t>(i));
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        const double z = s.normal(static_cast<std::uint64_t>(i));
        mu += z;
        mu2 += z * z;
    }
    mu /= n;
    mu2 /= n;
    CHECK(umin >= 0.0);
    CHECK(umax < 1.0);
    CHECK(std::abs(mu) < 0.01);
    CHECK(std::abs(mu2 - 1.0) < 0.01);
}

TEST_CASE("derived keys differ across words and order") {
    std::set<std::uint64_t> keys;
    for (std::uint64_t a = 0; a < 20; ++a)
        for (std::uint64_t b = 0; b < 20; ++b) keys.insert(derive_key({a, b}));
    CHECK(keys.size() == 400);
    CHECK(derive_key({1, 2}) != derive_key({2, 1}));
}

TEST_CASE("Rng::below stays in range") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
}

TEST_CASE("scalar table is always available and selectable") {
    IsaGuard guard;
    CHECK(simd::supported(simd::Isa::scalar));
    simd::set_active(simd::Isa::scalar);
    CHECK(simd::active_isa() == simd::Isa::scalar);
    CHECK(simd::name(simd::Isa::scalar) == "scalar");
}

TEST_CASE("unsupported instruction sets are rejected") {
    for (auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
        if (!simd::supported(isa)) CHECK_THROWS_AS(simd::set_active(isa), ConfigError);
    }
}

TEST_CASE("vector kernels match the scalar reference") {
    std::mt19937_64 gen(11);
    const auto& ref = simd::table(simd::Isa::scalar);
    for (auto isa : vector_isas()) {
        CAPTURE(simd::name(isa));
        const auto& k = simd::table(isa);
        for (std::size_t n = 0; n <= 67; ++n) {
            CAPTURE(n);
            const RowMatrix a = oracle::gaussian_matrix(gen, 1, static_cast<Index>(n) + 1);
            const RowMatrix b = oracle::gaussian_matrix(gen, 1, static_cast<Index>(n) + 1);
            // Offset by one element to exercise unaligned loads.
            const double* pa = a.data() + 1;
            const double* pb = b.data() + 1;
            CHECK(close_rel(k.dot(pa, pb, n), ref.dot(pa, pb, n)) < 1e-13);
            CHECK(close_rel(k.squared_distance(pa, pb, n), ref.squared_distance(pa, pb, n)) < 1e-13);
            CHECK(close_rel(k.norm_squared(pa, n), ref.norm_squared(pa, n)) < 1e-13);
            std::vector<double> y1(pb, pb + n), y2(pb, pb + n);
            k.axpy(0.37, pa, y1.data(), n);
            ref.axpy(0.37, pa, y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(y1[i], y2[i]) < 1e-15);
        }
        const RowMatrix rows = oracle::gaussian_matrix(gen, 9, 13);
        const RowMatrix point = oracle::gaussian_matrix(gen, 1, 13);
        std::vector<double> d1(9), d2(9);
        k.squared_distances_to(point.data(), rows.data(), 9, 13, 13, d1.data());
        ref.squared_distances_to(point.data(), rows.data(), 9, 13, 13, d2.data());
        for (int i = 0; i < 9; ++i) CHECK(close_rel(d1[i], d2[i]) < 1e-13);
    }
}

TEST_CASE("scalar reference kernels match naive loops") {
    std::mt19937_64 gen(12);
    const auto& ref = simd::table(simd::Isa::scalar);
    const RowMatrix a = oracle::gaussian_matrix(gen, 1, 31);
    const RowMatrix b = oracle::gaussian_matrix(gen, 1, 31);
    long double dot = 0, d2 = 0;
    for (int i = 0; i < 31; ++i) {
        dot += static_cast<long double>(a(0, i)) * b(0, i);
        d2 += static_cast<long double>(a(0, i) - b(0, i)) * (a(0, i) - b(0, i));
    }
    CHECK(close_rel(ref.dot(a.data(), b.data(), 31), static_cast<double>(dot)) < 1e-14);
    CHECK(close_rel(ref.squared_distance(a.data(), b.data(), 31), static_cast<double>(d2)) < 1e-14);
}

TEST_CASE("projection and kernel results agree across instruction sets") {
    IsaGuard guard;
    std::mt19937_64 gen(13);
    const RowMatrix z = oracle::gaussian_matrix(gen, 20, 5);
    for (auto isa : vector_isas()) {
        simd::set_active(simd::Isa::scalar);
        const RowMatrix p_ref = generate(ProjectionSpec{ProjectionKind::feature, 12, 300, 9}).entries();
        const double k_ref = kval(row_span(z, 0), row_span(z, 1), Bandwidth(0.3));
        simd::set_active(isa);
        const RowMatrix p_vec = generate(ProjectionSpec{ProjectionKind::feature, 12, 300, 9}).entries();
        const double k_vec = kval(row_span(z, 0), row_span(z, 1), Bandwidth(0.3));
        CHECK((p_ref - p_vec).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(close_rel(k_vec, k_ref) < 1e-14);
    }
}
