// AVX2 twins of the scalar kernels. Compiled with -mavx2 in this TU only.
// Accumulation order matches the scalar lanes element for element, so the
// results are bit-identical to the reference implementation.

#include "mfstop/kernels.hpp"

#if !defined(__AVX2__)
#error "kernels_avx2.cpp must be compiled with -mavx2"
#endif

#include <immintrin.h>

#include <limits>

namespace mfstop::kernels::detail {

namespace {

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + k));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t r = 0; k + r < n; ++r) lane[r] += x[k + r];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        // mul + add, not fmadd: keeps rounding identical to the scalar path
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k)));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t r = 0; k + r < n; ++r) lane[r] += a[k + r] * b[k + r];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void axpby_avx2(double a, const double* x, double b, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d t = _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + k)),
                                        _mm256_mul_pd(vb, _mm256_loadu_pd(y + k)));
        _mm256_storeu_pd(y + k, t);
    }
    for (; k < n; ++k) y[k] = a * x[k] + b * y[k];
}

double max_signed_diff_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4)
        acc = _mm256_max_pd(acc, _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k)));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t r = 0; k + r < n; ++r) {
        const double d = a[k + r] - b[k + r];
        if (d > lane[r]) lane[r] = d;
    }
    double m = lane[0];
    for (int j = 1; j < 4; ++j)
        if (lane[j] > m) m = lane[j];
    return m;
}

} // namespace

const Impl avx2_impl{sum_avx2, dot_avx2, axpby_avx2, max_signed_diff_avx2};

} // namespace mfstop::kernels::detail
