#pragma once
// Data-parallel primitives used by the particle and grid layers.
//
// Every kernel has a scalar reference implementation and an AVX2 variant;
// the variant is picked once at startup from cpuid (override with the
// environment variable MFSTOP_KERNELS=scalar|avx2, or force() in tests).
//
// The two implementations are bit-identical by construction: both accumulate
// into four independent lanes in the same order and combine the lanes as
// (l0+l1)+(l2+l3), and neither uses FMA contraction. This keeps results
// independent of the dispatch decision and of the thread count, which the
// reproducibility guarantees elsewhere rely on.

#include <cstddef>
#include <span>

namespace mfstop::kernels {

enum class Isa { scalar, avx2 };

// Implementation selected for this process.
Isa active();

// Force a specific implementation (throws if unavailable on this CPU).
void force(Isa isa);

// Lane-striped sum of x.
double sum(std::span<const double> x);

// Lane-striped inner product (no FMA).
double dot(std::span<const double> a, std::span<const double> b);

// y[i] = a*x[i] + b*y[i], elementwise.
void axpby(double a, std::span<const double> x, double b, std::span<double> y);

// max_i (a[i] - b[i]); -inf on empty input. NaN entries are not supported.
double max_signed_diff(std::span<const double> a, std::span<const double> b);

namespace detail {
struct Impl {
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpby)(double, const double*, double, double*, std::size_t);
    double (*max_signed_diff)(const double*, const double*, std::size_t);
};
extern const Impl scalar_impl;
#if defined(MFSTOP_HAVE_AVX2_TU)
extern const Impl avx2_impl;
#endif
} // namespace detail

} // namespace mfstop::kernels
