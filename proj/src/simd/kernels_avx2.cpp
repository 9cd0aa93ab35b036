// AVX2 variants. Built only when the toolchain targets x86; this file is
// compiled with -mavx2 while the rest of the library is not, so nothing
// here may be called unless the CPU reports AVX2 (the dispatcher checks).

#include "sparsedet/simd.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace sparsedet::simd {
namespace {

void accumulate_col_sumsq_avx2(const double* x, std::size_t d, std::size_t p,
                               double* out) {
    const std::size_t main = p & ~std::size_t{3};
    for (std::size_t k = 0; k < d; ++k) {
        const double* row = x + k * p;
        for (std::size_t j = 0; j < main; j += 4) {
            __m256d v = _mm256_loadu_pd(row + j);
            __m256d acc = _mm256_loadu_pd(out + j);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
            _mm256_storeu_pd(out + j, acc);
        }
        for (std::size_t j = main; j < p; ++j) out[j] += row[j] * row[j];
    }
}

inline double combine_lanes(__m256d acc) {
    // (l0+l1) + (l2+l3), matching the scalar reference exactly.
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    double l0 = _mm_cvtsd_f64(lo);
    double l1 = _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
    double l2 = _mm_cvtsd_f64(hi);
    double l3 = _mm_cvtsd_f64(_mm_unpackhi_pd(hi, hi));
    return (l0 + l1) + (l2 + l3);
}

double sumsq_avx2(const double* x, std::size_t len) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t main = len & ~std::size_t{3};
    for (std::size_t i = 0; i < main; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    double total = combine_lanes(acc);
    for (std::size_t i = main; i < len; ++i) total += x[i] * x[i];
    return total;
}

double thresholded_centered_sum_avx2(const double* e, std::size_t len,
                                     double cutoff, double centre) {
    __m256d acc = _mm256_setzero_pd();
    const __m256d vcut = _mm256_set1_pd(cutoff);
    const __m256d vcen = _mm256_set1_pd(centre);
    const std::size_t main = len & ~std::size_t{3};
    for (std::size_t i = 0; i < main; i += 4) {
        __m256d v = _mm256_loadu_pd(e + i);
        __m256d mask = _mm256_cmp_pd(v, vcut, _CMP_GE_OQ);
        __m256d term = _mm256_and_pd(mask, _mm256_sub_pd(v, vcen));
        acc = _mm256_add_pd(acc, term);
    }
    double total = combine_lanes(acc);
    for (std::size_t i = main; i < len; ++i)
        total += (e[i] >= cutoff) ? (e[i] - centre) : 0.0;
    return total;
}

}  // namespace

const KernelTable* avx2_kernels_table() {
    static const KernelTable table{
        "avx2",
        accumulate_col_sumsq_avx2,
        sumsq_avx2,
        thresholded_centered_sum_avx2,
    };
    return &table;
}

}  // namespace sparsedet::simd

#endif  // x86
