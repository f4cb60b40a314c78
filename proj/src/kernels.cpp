#include "mfstop/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace mfstop::kernels {

namespace {

// Scalar reference kernels. The 4-lane striping mirrors the AVX2 register
// layout exactly; see kernels_avx2.cpp for the vector twins.

double sum_scalar(const double* x, std::size_t n) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        lane[0] += x[k + 0];
        lane[1] += x[k + 1];
        lane[2] += x[k + 2];
        lane[3] += x[k + 3];
    }
    for (std::size_t r = 0; k + r < n; ++r) lane[r] += x[k + r];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        lane[0] += a[k + 0] * b[k + 0];
        lane[1] += a[k + 1] * b[k + 1];
        lane[2] += a[k + 2] * b[k + 2];
        lane[3] += a[k + 3] * b[k + 3];
    }
    for (std::size_t r = 0; k + r < n; ++r) lane[r] += a[k + r] * b[k + r];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void axpby_scalar(double a, const double* x, double b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

double max_signed_diff_scalar(const double* a, const double* b, std::size_t n) {
    double lane[4];
    for (auto& l : lane) l = -std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        for (int j = 0; j < 4; ++j) {
            const double d = a[k + j] - b[k + j];
            if (d > lane[j]) lane[j] = d;
        }
    }
    for (std::size_t r = 0; k + r < n; ++r) {
        const double d = a[k + r] - b[k + r];
        if (d > lane[r]) lane[r] = d;
    }
    double m = lane[0];
    for (int j = 1; j < 4; ++j)
        if (lane[j] > m) m = lane[j];
    return m;
}

bool avx2_available() {
#if defined(MFSTOP_HAVE_AVX2_TU) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

struct Dispatch {
    const detail::Impl* impl;
    Isa isa;
    Dispatch() {
        impl = &detail::scalar_impl;
        isa = Isa::scalar;
#if defined(MFSTOP_HAVE_AVX2_TU)
        const char* env = std::getenv("MFSTOP_KERNELS");
        const bool want_scalar = env != nullptr && std::strcmp(env, "scalar") == 0;
        if (!want_scalar && avx2_available()) {
            impl = &detail::avx2_impl;
            isa = Isa::avx2;
        }
#endif
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

} // namespace

namespace detail {
const Impl scalar_impl{sum_scalar, dot_scalar, axpby_scalar, max_signed_diff_scalar};
} // namespace detail

Isa active() { return dispatch().isa; }

void force(Isa isa) {
    if (isa == Isa::scalar) {
        dispatch().impl = &detail::scalar_impl;
        dispatch().isa = Isa::scalar;
        return;
    }
#if defined(MFSTOP_HAVE_AVX2_TU)
    if (avx2_available()) {
        dispatch().impl = &detail::avx2_impl;
        dispatch().isa = Isa::avx2;
        return;
    }
#endif
    throw std::runtime_error("kernels: avx2 not available on this CPU");
}

double sum(std::span<const double> x) { return dispatch().impl->sum(x.data(), x.size()); }

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("kernels::dot: size mismatch");
    return dispatch().impl->dot(a.data(), b.data(), a.size());
}

void axpby(double a, std::span<const double> x, double b, std::span<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("kernels::axpby: size mismatch");
    dispatch().impl->axpby(a, x.data(), b, y.data(), x.size());
}

double max_signed_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("kernels::max_signed_diff: size mismatch");
    return dispatch().impl->max_signed_diff(a.data(), b.data(), a.size());
}

} // namespace mfstop::kernels
