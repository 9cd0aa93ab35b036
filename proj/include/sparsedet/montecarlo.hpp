#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "sparsedet/priors.hpp"
#include "sparsedet/rng.hpp"
#include "sparsedet/statistics.hpp"

namespace sparsedet {

// ============================================================================
// Calibrated Monte Carlo: null calibration of thresholds, deterministic
// risk estimation, and power curves against the separation rates. The whole
// (seed -> result) map is a pure function, identical for any worker count.
// ============================================================================

struct McOptions {
    std::int64_t reps = 1000;
    std::uint64_t seed = 0;
    int jobs = 1;           // worker threads; results never depend on this
    std::int64_t k_max = 0; // observation rows; 0 = derive (>= 64)
};

// theta + noise/sqrt(n) on a k_max x p grid; entry (k, j) of replication
// `rep` is the same on every run and machine.
Observation make_observation(const CoefficientMatrix& theta, std::int64_t p,
                             std::int64_t n, std::int64_t k_max,
                             std::uint64_t seed, std::uint64_t rep,
                             RngDomain domain = RngDomain::Noise);

// Conservative empirical null quantile: the smallest sampled threshold with
// empirical rejection frequency <= level (ties at the cut walk upward).
// Simulates only the rows the statistic reads, at unit n (the null law of
// the coordinate energies does not depend on n). Appends to `table` when
// non-null. Throws InsufficientReps if reps < 10 / level.
double calibrate_threshold(const StatisticId& id, double level,
                           const McOptions& opt,
                           CalibrationTable* table = nullptr);

struct WilsonInterval {
    double lo = 0.0;
    double hi = 1.0;
};

// 95% Wilson score interval for `hits` successes out of `reps`.
WilsonInterval wilson_interval(std::int64_t hits, std::int64_t reps);

struct RiskEstimate {
    double type1 = 0.0;          // null rejection frequency
    double type2 = 0.0;          // alternative acceptance frequency
    double total = 0.0;          // type1 + type2
    double ci1_half_width = 0.0; // Wilson half-width around type1
    double ci2_half_width = 0.0; // Wilson half-width around type2
    double ci_half_width = 0.0;  // conservative half-width for the total
    std::int64_t reps = 0;
    std::uint64_t seed = 0;
    double truncation_bias = 0.0;  // signal mass the k_max rows cannot carry
};

// A fixed alternative matrix, or a prior drawn fresh each replication.
using Alternative = std::variant<CoefficientMatrix, PriorSpec>;

RiskEstimate estimate_risk(const TestSpec& spec, const Alternative& alt,
                           const ProblemDims& dims, const McOptions& opt);

struct PowerPoint {
    double scale = 0.0;      // radius multiplier C (signal norm = C * rate)
    double amplitude = 0.0;  // the prior amplitude c realizing the scale
    RiskEstimate risk;
};

// Risk along a grid of radius multiples of the minimax rate: at scale C the
// prior is scaled so its squared norm is C^2 * eps_sq(profile, dims).
// Scales must be nonnegative and increasing.
std::vector<PowerPoint> power_curve(const TestSpec& spec, PriorKind kind,
                                    const EigenProfile& profile,
                                    const ProblemDims& dims,
                                    const std::vector<double>& scales,
                                    const McOptions& opt);

}  // namespace sparsedet
