#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sparsedet/eigen_profile.hpp"
#include "sparsedet/rates.hpp"

namespace sparsedet {

// ============================================================================
// Observations, scalar statistics, test specifications, and the calibration
// table mapping statistic identities to Monte Carlo thresholds.
// ============================================================================

// Row-major k_max x p matrix of observations with noise variance 1/n.
struct Observation {
    std::int64_t k_max = 0;
    std::int64_t p = 0;
    std::int64_t n = 1;
    std::vector<double> x;  // size k_max * p

    double at(std::int64_t k, std::int64_t j) const {  // 1-based
        return x[static_cast<std::size_t>((k - 1) * p + (j - 1))];
    }
};

// Per-coordinate energies E_j = n * sum_{k <= d} X_{k,j}^2 for all j.
std::vector<double> coordinate_energies(const Observation& obs,
                                        std::int64_t d);

// sum_j (E_j - centre) 1{E_j >= d + r^2} with centre = conditional null
// mean; the thresholded scan statistic.
double thresholded_statistic(const Observation& obs, std::int64_t d, double r);

// n * sum_{j <= p} sum_{k <= nu} X_{k,j}^2; the dense chi-square statistic.
double dense_statistic(const Observation& obs, std::int64_t nu);

// ---------------------------------------------------------------------------
// Statistic identities: enough to reproduce a statistic's null distribution,
// and therefore to key calibrated thresholds.
// ---------------------------------------------------------------------------
struct StatisticId {
    enum class Kind { Thresholded, Dense, SmoothnessMax };
    Kind kind = Kind::Thresholded;
    std::int64_t d = 0;   // Thresholded: per-coordinate dof
    double r = 0.0;       // Thresholded: exceedance offset
    std::int64_t nu = 0;  // Dense: rows; SmoothnessMax: top of dyadic grid
    std::int64_t p = 0;
    std::int64_t n = 0;   // SmoothnessMax only (pivot depends on log log np)

    std::string canonical() const;  // exact, round-trippable key
    bool operator<(const StatisticId& other) const {
        return canonical() < other.canonical();
    }
};

// Evaluate the statistic named by an identity. For SmoothnessMax this is the
// calibration pivot max_nu (T_nu - nu p) / (sqrt(nu p LL(np)) + LL(np)).
double evaluate_statistic(const StatisticId& id, const Observation& obs);

// Rows of the observation matrix the statistic reads.
std::int64_t required_rows(const StatisticId& id);

// ---------------------------------------------------------------------------
// Calibration table
// ---------------------------------------------------------------------------
struct CalibrationEntry {
    StatisticId id;
    double level = 0.0;
    double threshold = 0.0;
    std::int64_t reps = 0;
    std::uint64_t seed = 0;
};

class CalibrationTable {
public:
    // Rejects inserts that would break threshold monotonicity in level for
    // the same statistic identity.
    void insert(const CalibrationEntry& entry);
    double lookup(const StatisticId& id, double level) const;  // MissingCalibration
    bool contains(const StatisticId& id, double level) const;
    const std::vector<CalibrationEntry>& entries() const { return entries_; }

    // CSV round trip (atomic write; load tolerates a missing file).
    void save(const std::string& path) const;
    static CalibrationTable load(const std::string& path);

private:
    std::vector<CalibrationEntry> entries_;
    std::map<std::pair<std::string, double>, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Test specifications
// ---------------------------------------------------------------------------
struct SparseThresholdTest {
    std::int64_t d = 0;
    double r = 0.0;
    double threshold = 0.0;
};

struct DenseChi2Test {
    std::int64_t nu = 0;
    double threshold = 0.0;
};

struct AdaptiveComponent {
    StatisticId id;
    double threshold = 0.0;
    std::int64_t s = 0;  // sparsity grid point the component targets
};

struct AdaptiveMaxTest {
    std::vector<AdaptiveComponent> components;
    double eta = 0.1;  // total level the Bonferroni split targets
};

struct SmoothnessAdaptiveTest {
    std::vector<std::int64_t> nu_grid;
    double k_mult = 0.0;  // per-nu threshold nu p + k (sqrt(nu p LL) + LL)
    std::int64_t p = 0;
    std::int64_t n = 0;
};

using TestSpec = std::variant<SparseThresholdTest, DenseChi2Test,
                              AdaptiveMaxTest, SmoothnessAdaptiveTest>;

// 1 = reject. Ties at a threshold reject. Throws DimensionMismatch when the
// observation is too shallow or has the wrong width.
int decide(const TestSpec& spec, const Observation& obs);

// Deepest observation row the test reads.
std::int64_t required_rows(const TestSpec& spec);

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

// The statistic identities the builders look up, exposed so callers can
// calibrate before building.
StatisticId sparse_test_id(const EigenProfile& profile,
                           const ProblemDims& dims, Regime regime,
                           const RatePolicy& policy = {});
StatisticId dense_test_id(const EigenProfile& profile,
                          const ProblemDims& dims);
StatisticId smoothness_pivot_id(double alpha0, double alpha1, std::int64_t p,
                                std::int64_t n);

// Thresholded scan test for the sparse regimes; r is the bulk or tail offset
// per the regime argument.
SparseThresholdTest make_sparse_test(const EigenProfile& profile,
                                     const ProblemDims& dims, Regime regime,
                                     const CalibrationTable& table,
                                     double level, const RatePolicy& policy = {});

// Dense chi-square test with a calibrated threshold.
DenseChi2Test make_dense_test(const EigenProfile& profile,
                              const ProblemDims& dims,
                              const CalibrationTable& table, double level,
                              const RatePolicy& policy = {});

// Dense chi-square test with the closed-form threshold
// nu p + (2 / sqrt(eta)) sqrt(nu p); level <= eta by Chebyshev, no
// calibration required.
DenseChi2Test make_dense_test_analytic(const EigenProfile& profile,
                                       const ProblemDims& dims, double eta);

// The (nu, s)-scan components behind the adaptive max test, without
// thresholds: every distinct statistic identity paired with the target
// sparsity. Calibrate each at level eta / (2 * count) and feed the table to
// make_adaptive_test.
std::vector<AdaptiveComponent> plan_adaptive_components(
    const EigenProfile& profile, std::int64_t p, std::int64_t n,
    const RatePolicy& policy = {});

AdaptiveMaxTest make_adaptive_test(const EigenProfile& profile, std::int64_t p,
                                   std::int64_t n, const CalibrationTable& table,
                                   double eta, const RatePolicy& policy = {});

// Smoothness-adaptive dense scan; k_mult either supplied analytically or
// looked up (calibrated pivot quantile) from the table at `level`.
SmoothnessAdaptiveTest make_smoothness_adaptive_test(
    double alpha0, double alpha1, std::int64_t p, std::int64_t n,
    const CalibrationTable& table, double level);
SmoothnessAdaptiveTest make_smoothness_adaptive_test_analytic(
    double alpha0, double alpha1, std::int64_t p, std::int64_t n,
    double k_mult);

}  // namespace sparsedet
