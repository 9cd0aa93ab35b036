#include "sparsedet/rates.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sparsedet/errors.hpp"

namespace sparsedet {

namespace {

constexpr std::int64_t kNuCap = std::int64_t{1} << 40;

// Predicate behind the truncation order; monotone in nu (mu nonincreasing,
// the comparison level increasing).
inline bool settled(const EigenProfile& profile, std::int64_t nu, double lt,
                    double n) {
    return eigenvalue(profile, nu) <=
           std::sqrt(static_cast<double>(nu) * lt) / n;
}

}  // namespace

void validate(const ProblemDims& dims) {
    if (dims.p < 1) throw InvalidProfile("dims: p must be >= 1");
    if (dims.s < 1 || dims.s > dims.p)
        throw InvalidProfile("dims: s must satisfy 1 <= s <= p");
    if (dims.n < 1) throw InvalidProfile("dims: n must be >= 1");
}

double log_term(const ProblemDims& dims, double a) {
    return std::log1p(static_cast<double>(dims.p) * a /
                      (static_cast<double>(dims.s) * static_cast<double>(dims.s)));
}

std::int64_t truncation_order(const EigenProfile& profile,
                              const ProblemDims& dims, double a) {
    validate(dims);
    const double lt = log_term(dims, a);
    const double n = static_cast<double>(dims.n);
    if (settled(profile, 1, lt, n)) return 1;
    std::int64_t lo = 1, hi = 2;
    while (!settled(profile, hi, lt, n)) {
        lo = hi;
        if (hi > kNuCap)
            throw Overflow("truncation order exceeds 2^40");
        hi *= 2;
    }
    // lo fails, hi holds; shrink to the smallest holding nu.
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (settled(profile, mid, lt, n))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double rate_envelope(const EigenProfile& profile, const ProblemDims& dims,
                     double a) {
    const std::int64_t nu = truncation_order(profile, dims, a);
    const double lt = log_term(dims, a);
    const double left = eigenvalue(profile, nu);
    const double right =
        std::sqrt(static_cast<double>(nu - 1) * lt) / static_cast<double>(dims.n);
    return std::max(left, right);
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::Trivial: return "trivial";
        case Regime::SparseBulk: return "sparse-bulk";
        case Regime::SparseTail: return "sparse-tail";
        case Regime::Dense: return "dense";
    }
    return "unknown";
}

Regime classify_regime(const EigenProfile& profile, const ProblemDims& dims,
                       const RatePolicy& policy, double a) {
    validate(dims);
    const double lt = log_term(dims, a);
    if (lt > 0.5 * static_cast<double>(dims.n)) return Regime::Trivial;
    if (static_cast<double>(dims.s) * static_cast<double>(dims.s) >=
        static_cast<double>(dims.p) * a)
        return Regime::Dense;
    const std::int64_t d =
        std::max(truncation_order(profile, dims, a), policy.d_floor);
    return std::sqrt(lt) > policy.k3 * std::sqrt(static_cast<double>(d))
               ? Regime::SparseTail
               : Regime::SparseBulk;
}

RateReport separation_rate(const EigenProfile& profile,
                           const ProblemDims& dims, const RatePolicy& policy) {
    validate(dims);
    RateReport out;
    out.regime = classify_regime(profile, dims, policy);
    const double s = static_cast<double>(dims.s);
    const double n = static_cast<double>(dims.n);
    const double lt = log_term(dims);
    out.nu = truncation_order(profile, dims);
    out.gamma = rate_envelope(profile, dims);
    if (out.regime == Regime::Trivial) {
        out.eps_sq = s;
        return out;
    }
    const double nu = static_cast<double>(out.nu);
    double eps;
    if (s * s < static_cast<double>(dims.p)) {
        eps = (s / n) * lt + (s / n) * std::sqrt(nu * lt);
    } else {
        eps = std::sqrt(static_cast<double>(dims.p) * nu) / n;
    }
    out.eps_sq = std::min(eps, s);
    return out;
}

std::int64_t dyadic_bucket(std::int64_t v) {
    std::int64_t b = 1;
    while (b < v) b *= 2;
    return b;
}

namespace {

// nu(s, a) is nondecreasing in s, so buckets over an s-range where the two
// endpoints agree are constant; recurse only across disagreements.
void collect_buckets(const EigenProfile& profile, std::int64_t n, double a,
                     std::int64_t s_lo, std::int64_t s_hi, std::int64_t p,
                     std::int64_t b_lo, std::int64_t b_hi,
                     std::set<std::int64_t>& out) {
    out.insert(b_lo);
    out.insert(b_hi);
    if (b_lo == b_hi || s_hi - s_lo <= 1) return;
    const std::int64_t mid = s_lo + (s_hi - s_lo) / 2;
    const std::int64_t b_mid =
        dyadic_bucket(truncation_order(profile, {p, mid, n}, a));
    collect_buckets(profile, n, a, s_lo, mid, p, b_lo, b_mid, out);
    collect_buckets(profile, n, a, mid, s_hi, p, b_mid, b_hi, out);
}

std::vector<std::int64_t> buckets_over_range(const EigenProfile& profile,
                                             std::int64_t p, std::int64_t n,
                                             double a, std::int64_t s_lo,
                                             std::int64_t s_hi) {
    std::set<std::int64_t> out;
    const std::int64_t b_lo =
        dyadic_bucket(truncation_order(profile, {p, s_lo, n}, a));
    const std::int64_t b_hi =
        dyadic_bucket(truncation_order(profile, {p, s_hi, n}, a));
    collect_buckets(profile, n, a, s_lo, s_hi, p, b_lo, b_hi, out);
    return {out.begin(), out.end()};
}

}  // namespace

std::vector<std::int64_t> truncation_grid(const EigenProfile& profile,
                                          std::int64_t p, std::int64_t n,
                                          double a) {
    return buckets_over_range(profile, p, n, a, 1, p);
}

AdaptationResult adaptation_fixed_point(const EigenProfile& profile,
                                        std::int64_t p, std::int64_t n) {
    const double a_max = std::log(static_cast<double>(p)) + 1.0;  // log(e p)
    const auto qualifies = [&](double a) {
        const auto grid = truncation_grid(profile, p, n, a);
        return std::log(static_cast<double>(grid.size())) + 1.0 >= a;
    };
    // a = 1 always qualifies (grid nonempty). Scan the whole geometric grid
    // rather than stopping at the first failure: the grid size need not be
    // monotone in a.
    double best = 1.0;
    for (double a = 1.0; a <= a_max; a *= 1.01) {
        if (a > best && qualifies(a)) best = a;
    }
    // Refine the boundary inside the inter-grid gap above the winner.
    double lo = best, hi = std::min(best * 1.01, a_max);
    if (qualifies(hi)) {
        lo = hi;
    } else {
        for (int i = 0; i < 40 && (hi - lo) > 1e-9 * lo; ++i) {
            const double mid = 0.5 * (lo + hi);
            (qualifies(mid) ? lo : hi) = mid;
        }
    }
    AdaptationResult out;
    out.cost = lo;
    out.grid = truncation_grid(profile, p, n, lo);
    return out;
}

std::vector<std::int64_t> sparsity_grid(std::int64_t p, double a_cost) {
    std::set<std::int64_t> out;
    const double top = std::sqrt(static_cast<double>(p) * a_cost);
    const double j_top = std::ceil(std::log2(top));  // exclusive exponent
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(j_top); ++j) {
        const std::int64_t v = std::int64_t{1} << j;
        if (v <= p) out.insert(v);
    }
    out.insert(p);
    return {out.begin(), out.end()};
}

std::vector<std::int64_t> restricted_truncation_grid(
    const EigenProfile& profile, std::int64_t p, std::int64_t n,
    double a_cost) {
    const double s_min_real = std::sqrt(static_cast<double>(p) * a_cost);
    std::int64_t s_min = static_cast<std::int64_t>(std::ceil(s_min_real));
    s_min = std::clamp<std::int64_t>(s_min, 1, p);
    return buckets_over_range(profile, p, n, a_cost, s_min, p);
}

AdaptiveRateReport adaptive_separation_rate(const EigenProfile& profile,
                                            const ProblemDims& dims) {
    validate(dims);
    const AdaptationResult fixed = adaptation_fixed_point(profile, dims.p, dims.n);
    AdaptiveRateReport out;
    out.cost = fixed.cost;
    out.nu = truncation_order(profile, dims, fixed.cost);
    const double s = static_cast<double>(dims.s);
    const double n = static_cast<double>(dims.n);
    const double lt = log_term(dims, fixed.cost);
    const double nu = static_cast<double>(out.nu);
    const double scan_floor = std::sqrt(static_cast<double>(dims.p) * fixed.cost);
    if (s >= scan_floor) {
        out.eps_sq = (s / n) * std::sqrt(nu * lt);
        out.lower_bound_verified = lt <= 0.5 * n;
    } else {
        out.eps_sq = std::max((s / n) * lt, (s / n) * std::sqrt(nu * lt));
        out.lower_bound_verified = false;  // open strip below the scan floor
    }
    out.eps_sq = std::min(out.eps_sq, s);
    return out;
}

double loglog_floored(double x) {
    const double inner = std::max(std::log(x), 1.0);
    return std::max(std::log(inner), 1.0);
}

SmoothnessAdaptiveRates smoothness_adaptive_rates(double alpha, double alpha0,
                                                  double alpha1,
                                                  std::int64_t p,
                                                  std::int64_t s,
                                                  std::int64_t n) {
    if (!(alpha0 > 0.0) || !(alpha1 >= alpha0) || alpha < alpha0 ||
        alpha > alpha1)
        throw InvalidProfile("smoothness window needs 0 < alpha0 <= alpha <= alpha1");
    validate({p, s, n});
    const double pd = static_cast<double>(p);
    const double sd = static_cast<double>(s);
    const double nd = static_cast<double>(n);
    const auto rate_exponent = [](double al) { return 4.0 * al / (4.0 * al + 1.0); };

    SmoothnessAdaptiveRates out;
    const double ll_np = loglog_floored(nd * pd);
    const double b_dense = nd * sd / std::sqrt(pd * ll_np);
    out.tau_dense_sq = sd * std::pow(b_dense, -rate_exponent(alpha));

    const double lg = std::max(std::log(pd * loglog_floored(nd)), 1.0);
    const double b_sparse = nd / std::sqrt(lg);
    out.tau_sparse_sq =
        sd * lg / nd + sd * std::pow(b_sparse, -rate_exponent(alpha));

    // Scan grid sized by the deepest truncation any (s, alpha) in the window
    // can demand: s = p, alpha = alpha0.
    const double nu_top =
        std::pow(nd * pd / std::sqrt(pd * ll_np), 2.0 / (4.0 * alpha0 + 1.0));
    const std::int64_t k_top =
        static_cast<std::int64_t>(std::ceil(std::log2(std::max(nu_top, 1.0))));
    for (std::int64_t k = 0; k <= k_top; ++k)
        out.test_grid.push_back(std::int64_t{1} << k);
    return out;
}

}  // namespace sparsedet
