#pragma once

#include <cstddef>

namespace sparsedet::simd {

// ============================================================================
// Data-parallel inner loops behind the test statistics.
//
// Each kernel has a scalar reference and (on x86) an AVX2 variant. The
// scalar versions use the same lane-interleaved accumulation pattern as the
// vector code, and every translation unit is built with contraction off, so
// all variants agree bit for bit; the equivalence suite asserts exact
// equality, not tolerances.
// ============================================================================

struct KernelTable {
    const char* name;

    // out[j] += sum_{k < d} x[k*p + j]^2 for j < p (vertical accumulation;
    // x is row-major with leading dimension p, out has length p).
    void (*accumulate_col_sumsq)(const double* x, std::size_t d, std::size_t p,
                                 double* out);

    // Sum of squares of a contiguous range, 4-lane interleaved reduction.
    double (*sumsq)(const double* x, std::size_t len);

    // sum_j (e[j] - centre) * [e[j] >= cutoff], 4-lane interleaved.
    double (*thresholded_centered_sum)(const double* e, std::size_t len,
                                       double cutoff, double centre);
};

const KernelTable& scalar_kernels();

// Null when the build carries no AVX2 variant or the CPU lacks it.
const KernelTable* avx2_kernels_if_supported();

// Resolved once per process. SPARSEDET_SIMD=scalar|avx2 overrides; the
// avx2 value falls back to scalar (with no error) when unsupported.
const KernelTable& active_kernels();

}  // namespace sparsedet::simd
