#include "sparsedet/special_functions.hpp"

#include <cmath>
#include <limits>

#include "sparsedet/errors.hpp"

namespace sparsedet {

namespace {

constexpr int kMaxIter = 20000;
constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kLn2 = 0.69314718055994530941723212145818;

// log(x^a e^{-x} / Gamma(a)), the dominant factor of both branches.
inline double log_prefactor(double a, double x) {
    return a * std::log(x) - x - std::lgamma(a);
}

// Lower-gamma power series: P(a, x) = prefactor * sum, valid for x < a + 1.
// Returns the regularized sum so the caller can attach the prefactor on
// whichever scale it needs.
double lower_series_sum(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps) return sum;
    }
    throw NonConvergence("reg_lower_gamma series stalled");
}

// Modified Lentz continued fraction for the upper branch, x >= a + 1:
// Q(a, x) = prefactor * cf.
double upper_cf(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) return h;
    }
    throw NonConvergence("reg_upper_gamma continued fraction stalled");
}

void check_domain(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x))
        throw NonConvergence("incomplete gamma arguments out of domain");
}

}  // namespace

double reg_upper_gamma(double a, double x) {
    check_domain(a, x);
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        const double p = std::exp(log_prefactor(a, x)) * lower_series_sum(a, x);
        return 1.0 - p;
    }
    return std::exp(log_prefactor(a, x)) * upper_cf(a, x);
}

double reg_lower_gamma(double a, double x) {
    check_domain(a, x);
    if (x == 0.0) return 0.0;
    if (x < a + 1.0)
        return std::exp(log_prefactor(a, x)) * lower_series_sum(a, x);
    return 1.0 - std::exp(log_prefactor(a, x)) * upper_cf(a, x);
}

double log_reg_upper_gamma(double a, double x) {
    check_domain(a, x);
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) {
        // Q is bounded away from zero on this branch; the linear path is
        // already fully accurate.
        const double p = std::exp(log_prefactor(a, x)) * lower_series_sum(a, x);
        return std::log1p(-p);
    }
    const double lg = log_prefactor(a, x) + std::log(upper_cf(a, x));
    if (!std::isfinite(lg)) throw Underflow("log tail not representable");
    return lg;
}

TemmeApprox temme_upper_gamma_order1(double a, double x) {
    check_domain(a, x);
    if (!(x > 0.0)) throw NonConvergence("temme expansion needs x > 0");
    const double mu = x / a - 1.0;
    double eta, c0;
    if (std::fabs(mu) < 1e-4) {
        // Series around mu = 0 where eta = mu - mu^2/3 + ... cancels badly.
        eta = mu * (1.0 - mu / 3.0 + 7.0 * mu * mu / 36.0 -
                    73.0 * mu * mu * mu / 540.0);
        c0 = -1.0 / 3.0 + mu / 12.0 - 23.0 * mu * mu / 540.0 +
             353.0 * mu * mu * mu / 12960.0;
    } else {
        const double h = mu - std::log1p(mu);  // > 0 for mu != 0
        eta = std::copysign(std::sqrt(2.0 * h), mu);
        c0 = 1.0 / mu - 1.0 / eta;
    }
    const double z = eta * std::sqrt(a);
    const double envelope =
        std::exp(-0.5 * a * eta * eta) / std::sqrt(kTwoPi * a);
    TemmeApprox out;
    out.envelope = envelope;
    out.value = 0.5 * std::erfc(z / std::sqrt(2.0)) + envelope * c0;
    return out;
}

double chi2_sf(double d, double x) { return reg_upper_gamma(0.5 * d, 0.5 * x); }

double chi2_cdf(double d, double x) { return reg_lower_gamma(0.5 * d, 0.5 * x); }

double chi2_logsf(double d, double x) {
    return log_reg_upper_gamma(0.5 * d, 0.5 * x);
}

double chi2_pdf(double d, double x) {
    if (!(d > 0.0) || !(x > 0.0))
        throw NonConvergence("chi2_pdf needs d > 0, x > 0");
    const double half = 0.5 * d;
    return std::exp((half - 1.0) * std::log(x) - 0.5 * x - half * kLn2 -
                    std::lgamma(half));
}

double conditional_null_mean(double d, double r) {
    const double c = d + r * r;
    const double denom = chi2_sf(d, c);
    if (denom >= 1e-250) {
        return d * chi2_sf(d + 2.0, c) / denom;
    }
    const double ln = chi2_logsf(d + 2.0, c) - chi2_logsf(d, c);
    const double ratio = std::exp(ln);
    if (!std::isfinite(ratio) || ratio == 0.0)
        throw Underflow("conditional null mean tail ratio underflowed");
    return d * ratio;
}

double truncated_chi2_variance(double d, double r) {
    const double c = d + r * r;
    const double denom = chi2_sf(d, c);
    double m1, m2;
    if (denom >= 1e-250) {
        m1 = d * chi2_sf(d + 2.0, c) / denom;
        m2 = d * (d + 2.0) * chi2_sf(d + 4.0, c) / denom;
    } else {
        const double lb = chi2_logsf(d, c);
        m1 = d * std::exp(chi2_logsf(d + 2.0, c) - lb);
        m2 = d * (d + 2.0) * std::exp(chi2_logsf(d + 4.0, c) - lb);
        if (!std::isfinite(m1) || m1 == 0.0)
            throw Underflow("truncated variance tail ratio underflowed");
    }
    return m2 - m1 * m1;
}

double deviation_threshold(double d, double x) {
    return d + 2.0 * std::sqrt(d * x) + 2.0 * x;
}

double sample_noncentral_chi2(std::int64_t d, double lambda, SubStream& rng) {
    double total = 0.0;
    const double shift = std::sqrt(lambda);
    for (std::int64_t i = 0; i < d; ++i) {
        const double g = rng.normal() + (i == 0 ? shift : 0.0);
        total += g * g;
    }
    return total;
}

}  // namespace sparsedet
