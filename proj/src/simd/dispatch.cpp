#include "cgp/simd.hpp"

#include "cgp/errors.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace cgp::simd {
namespace {

Isa best_supported() noexcept {
    if (supported(Isa::avx2)) return Isa::avx2;
    if (supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

Isa initial_isa() noexcept {
    const char* env = std::getenv("CGP_SIMD");
    if (env != nullptr) {
        const std::string_view want(env);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
            if (want == name(isa) && supported(isa)) return isa;
        }
    }
    return best_supported();
}

std::atomic<const KernelTable*>& current() noexcept {
    static std::atomic<const KernelTable*> ptr{&table(initial_isa())};
    return ptr;
}

} // namespace

bool supported(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2:
        return detail::avx2_table;
#endif
#if defined(__aarch64__)
    case Isa::neon:
        return detail::neon_table;
#endif
    default:
        return detail::scalar_table;
    }
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return active().isa; }

void set_active(Isa isa) {
    if (!supported(isa)) throw ConfigError("SIMD instruction set not supported here: " + std::string(name(isa)));
    current().store(&table(isa), std::memory_order_relaxed);
}

std::string_view name(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    }
    return "unknown";
}

} // namespace cgp::simd
