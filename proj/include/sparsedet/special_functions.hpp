#pragma once

#include <cstdint>

#include "sparsedet/rng.hpp"

namespace sparsedet {

// ============================================================================
// Incomplete-gamma machinery and chi-square tail quantities.
//
// Everything here is double precision with relative accuracy near 1e-13 on
// the working domain a in [0.5, 500]; tail evaluations switch to log space
// well before the linear scale underflows.
// ============================================================================

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
// Series branch for x < a + 1, Lentz continued fraction otherwise.
double reg_upper_gamma(double a, double x);

// Regularized lower incomplete gamma P(a, x) = 1 - Q(a, x).
double reg_lower_gamma(double a, double x);

// log Q(a, x); finite far beyond the 1e-308 linear-scale floor.
double log_reg_upper_gamma(double a, double x);

// Uniform asymptotic (Temme) expansion of Q(a, x) truncated after the first
// correction term, plus the magnitude of the leading neglected scale. The
// remainder is bounded by a modest multiple of `envelope` on a >= 25.
struct TemmeApprox {
    double value;     // (1 - Phi(eta sqrt(a))) + exp(-a eta^2/2)/sqrt(2 pi a) c0
    double envelope;  // exp(-a eta^2/2) / sqrt(2 pi a)
};
TemmeApprox temme_upper_gamma_order1(double a, double x);

// Chi-square distribution with d degrees of freedom (d > 0 real).
double chi2_sf(double d, double x);
double chi2_cdf(double d, double x);
double chi2_logsf(double d, double x);
double chi2_pdf(double d, double x);

// Conditional mean of a chi-square_d given exceedance of d + r^2:
// E[X | X >= d + r^2]. Log-space ratio once the survival probability
// drops below 1e-250.
double conditional_null_mean(double d, double r);

// Var(X | X >= d + r^2) for X ~ chi-square_d.
double truncated_chi2_variance(double d, double r);

// Upper deviation threshold d + 2 sqrt(d x) + 2 x; a chi-square_d exceeds
// it with probability at most exp(-x).
double deviation_threshold(double d, double x);

// One draw of a noncentral chi-square with d degrees of freedom and
// noncentrality lambda (sum of d squared shifted normals).
double sample_noncentral_chi2(std::int64_t d, double lambda, SubStream& rng);

}  // namespace sparsedet
