#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsedet/eigen_profile.hpp"

namespace sparsedet {

// ============================================================================
// Separation-rate calculus for the sequence model: truncation orders, the
// bias/variance envelope, minimax and adaptive rates, and the dyadic grids
// the adaptive tests scan.
// ============================================================================

struct ProblemDims {
    std::int64_t p = 1;  // number of additive coordinates
    std::int64_t s = 1;  // sparsity (active coordinates), 1 <= s <= p
    std::int64_t n = 1;  // samples (noise variance 1/n)
};

void validate(const ProblemDims& dims);

// log(1 + p a / s^2), the effective log-cardinality at scan level a.
double log_term(const ProblemDims& dims, double a = 1.0);

// Smallest nu >= 1 with mu_nu <= sqrt(nu * log_term) / n; doubling plus
// bisection over the monotone predicate. Throws Overflow past 2^40.
std::int64_t truncation_order(const EigenProfile& profile,
                              const ProblemDims& dims, double a = 1.0);

// max_nu min(mu_nu, sqrt(nu * log_term)/n), evaluated in closed form as
// max(mu_{nu*}, sqrt((nu* - 1) * log_term)/n) at nu* = truncation_order.
double rate_envelope(const EigenProfile& profile, const ProblemDims& dims,
                     double a = 1.0);

enum class Regime { Trivial, SparseBulk, SparseTail, Dense };
std::string regime_name(Regime r);

struct RatePolicy {
    double k2 = 1.0;            // exceedance-offset multiplier
    double k3 = 1.0;            // bulk/tail boundary multiplier
    std::int64_t d_floor = 8;   // minimum column dof for thresholded tests
};

Regime classify_regime(const EigenProfile& profile, const ProblemDims& dims,
                       const RatePolicy& policy = {}, double a = 1.0);

struct RateReport {
    std::int64_t nu = 1;    // truncation order at a = 1
    double gamma = 0.0;     // rate envelope at a = 1
    double eps_sq = 0.0;    // squared separation rate, capped at s
    Regime regime = Regime::SparseBulk;
};

// Minimax squared separation rate with the triviality guard and the s cap.
RateReport separation_rate(const EigenProfile& profile,
                           const ProblemDims& dims,
                           const RatePolicy& policy = {});

// Dyadic buckets {2^k : exists s in [p] with 2^(k-1) < nu(s, a) <= 2^k}.
std::vector<std::int64_t> truncation_grid(const EigenProfile& profile,
                                          std::int64_t p, std::int64_t n,
                                          double a);

// Largest a >= 1 (refined on a 1.01-geometric grid) with
// log(e |truncation_grid(a)|) >= a, together with the grid at that a.
struct AdaptationResult {
    double cost = 1.0;                 // the fixed point
    std::vector<std::int64_t> grid;    // truncation grid at `cost`
};
AdaptationResult adaptation_fixed_point(const EigenProfile& profile,
                                        std::int64_t p, std::int64_t n);

// {1, 2, 4, ..., 2^(ceil(log2 sqrt(p a)) - 1)} union {p}.
std::vector<std::int64_t> sparsity_grid(std::int64_t p, double a_cost);

// Dyadic buckets of nu(s, a_cost) over s in [ceil(sqrt(p a_cost)), p].
std::vector<std::int64_t> restricted_truncation_grid(
    const EigenProfile& profile, std::int64_t p, std::int64_t n,
    double a_cost);

struct AdaptiveRateReport {
    std::int64_t nu = 1;     // truncation order at a = cost
    double cost = 1.0;       // adaptation fixed point
    double eps_sq = 0.0;     // squared adaptive separation rate, capped at s
    bool lower_bound_verified = false;  // false on s < sqrt(p * cost)
};
AdaptiveRateReport adaptive_separation_rate(const EigenProfile& profile,
                                            const ProblemDims& dims);

// Rates for simultaneous sparsity/smoothness adaptation over Sobolev
// profiles with alpha in [alpha0, alpha1], and the dyadic scan grid sized
// for the worst case (s = p, alpha = alpha0).
struct SmoothnessAdaptiveRates {
    double tau_dense_sq = 0.0;
    double tau_sparse_sq = 0.0;
    std::vector<std::int64_t> test_grid;
};
SmoothnessAdaptiveRates smoothness_adaptive_rates(double alpha, double alpha0,
                                                  double alpha1,
                                                  std::int64_t p,
                                                  std::int64_t s,
                                                  std::int64_t n);

// max(log(max(log(x), 1)), 1): iterated log with the conventional floor.
double loglog_floored(double x);

// Next power of two >= v (v >= 1).
std::int64_t dyadic_bucket(std::int64_t v);

}  // namespace sparsedet
