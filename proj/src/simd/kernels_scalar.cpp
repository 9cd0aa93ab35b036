#include "sparsedet/simd.hpp"

namespace sparsedet::simd {
namespace {

void accumulate_col_sumsq_scalar(const double* x, std::size_t d, std::size_t p,
                                 double* out) {
    for (std::size_t k = 0; k < d; ++k) {
        const double* row = x + k * p;
        for (std::size_t j = 0; j < p; ++j) out[j] += row[j] * row[j];
    }
}

// Reductions keep four independent accumulators (element i feeds lane i%4)
// and combine as (l0+l1)+(l2+l3); the vector variants do the identical
// thing, which is what makes exact equality testable.
double sumsq_scalar(const double* x, std::size_t len) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t main = len & ~std::size_t{3};
    for (std::size_t i = 0; i < main; i += 4) {
        acc[0] += x[i] * x[i];
        acc[1] += x[i + 1] * x[i + 1];
        acc[2] += x[i + 2] * x[i + 2];
        acc[3] += x[i + 3] * x[i + 3];
    }
    double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (std::size_t i = main; i < len; ++i) total += x[i] * x[i];
    return total;
}

double thresholded_centered_sum_scalar(const double* e, std::size_t len,
                                       double cutoff, double centre) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t main = len & ~std::size_t{3};
    for (std::size_t i = 0; i < main; i += 4) {
        acc[0] += (e[i] >= cutoff) ? (e[i] - centre) : 0.0;
        acc[1] += (e[i + 1] >= cutoff) ? (e[i + 1] - centre) : 0.0;
        acc[2] += (e[i + 2] >= cutoff) ? (e[i + 2] - centre) : 0.0;
        acc[3] += (e[i + 3] >= cutoff) ? (e[i + 3] - centre) : 0.0;
    }
    double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (std::size_t i = main; i < len; ++i)
        total += (e[i] >= cutoff) ? (e[i] - centre) : 0.0;
    return total;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar",
        accumulate_col_sumsq_scalar,
        sumsq_scalar,
        thresholded_centered_sum_scalar,
    };
    return table;
}

}  // namespace sparsedet::simd
