#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsedet/eigen_profile.hpp"
#include "sparsedet/rates.hpp"
#include "sparsedet/rng.hpp"

namespace sparsedet {

// ============================================================================
// Least-favorable priors over the sparse ellipsoid class and their
// chi-square divergences against the pure-noise law.
// ============================================================================

// A sampled coefficient matrix: `rows` leading rows (zero below), p columns.
struct CoefficientMatrix {
    std::int64_t rows = 0;
    std::int64_t p = 0;
    std::vector<double> theta;  // row-major, size rows * p

    double at(std::int64_t k, std::int64_t j) const {  // 1-based
        return theta[static_cast<std::size_t>((k - 1) * p + (j - 1))];
    }
    double squared_norm() const;
};

enum class PriorKind {
    SpikeFixed,    // amplitude +c on row 1 over a uniform s-subset
    SpikeSigned,   // amplitude +-c on row 1 over a uniform s-subset
    BulkSigned,    // amplitudes +-c rho on rows 1..nu-1, rho^2 = envelope/nu
    AdaptiveBulk,  // dyadic truncation drawn uniformly, s matched to it
    SobolevDense,  // dyadic nu scan of the smoothness window, dense-regime scale
    SobolevSparse  // dyadic nu scan of the smoothness window, sparse-regime scale
};

std::string prior_name(PriorKind kind);
PriorKind prior_kind_from_name(const std::string& name);

struct PriorSpec {
    PriorKind kind = PriorKind::SpikeFixed;
    double c = 0.5;          // amplitude multiplier
    EigenProfile profile;    // ellipsoid shape (Sobolev for the scan priors)
    ProblemDims dims;        // p, s, n; AdaptiveBulk derives s per draw
    double alpha0 = 0.0;     // smoothness window (scan priors)
    double alpha1 = 0.0;
    double delta = 0.0;      // sparsity-regime margin for the scan priors
};

// Largest amplitude multiplier for which every draw stays inside the
// parameter space (per-column ellipsoid constraint, exact).
double admissible_amplitude(const PriorSpec& spec);

// Draw one coefficient matrix. Throws InfeasibleSpec when c exceeds the
// admissible amplitude (1e-9 slack) or the requested scan grids are empty.
CoefficientMatrix sample_prior(const PriorSpec& spec, SubStream& rng);

// Exact ellipsoid membership check with relative slack.
bool in_parameter_space(const CoefficientMatrix& theta,
                        const EigenProfile& profile, const ProblemDims& dims,
                        double rel_slack = 1e-9);

// Membership against the class the draw targets. For the smoothness-scan
// kinds the ellipsoid exponent depends on the drawn truncation (recovered
// from the matrix's row count); for the others this is in_parameter_space
// with the prior's own profile. The sparsity bound uses the draw's support.
bool draw_in_class(const PriorSpec& spec, const CoefficientMatrix& theta,
                   double rel_slack = 1e-9);

// Exact chi-square divergence of the induced Gaussian mixture from the null,
// by enumeration over the support-overlap law. Supported for the spike,
// bulk, and adaptive kinds with p <= 10^4 and sparsities <= 100; otherwise
// throws EnumerationTooLarge.
double mixture_chi2_divergence_exact(const PriorSpec& spec);

// Closed-form upper bound (1 - s/p + (s/p) e^lambda)^s - 1 with lambda the
// per-overlap log moment generating value.
double mixture_chi2_divergence_bound(const PriorSpec& spec);

// Paired-draw Monte Carlo estimate of the same divergence (the only option
// for the smoothness-scan priors). Returns the estimate and its standard
// error.
struct DivergenceEstimate {
    double value = 0.0;
    double std_error = 0.0;
};
DivergenceEstimate mixture_chi2_divergence_mc(const PriorSpec& spec,
                                              std::int64_t reps,
                                              std::uint64_t seed);

// Total-risk lower bound 1 - sqrt(div)/2 clamped to [0, 1].
double risk_lower_bound_from_divergence(double divergence);

// Amplitude c making the prior's (deterministic) squared signal norm equal
// target_norm_sq; used by power curves to express scale in rate units.
double amplitude_for_norm(const PriorSpec& spec, double target_norm_sq);

// Deterministic squared norm of a draw at amplitude c = 1; defined for the
// fixed-shape kinds (spike and bulk), whose norm does not depend on the
// randomness. The adaptive and scan kinds take c in separation-radius units
// already, so no norm conversion applies.
double unit_norm_sq(const PriorSpec& spec);

// Deepest row any draw from the prior can touch.
std::int64_t prior_max_rows(const PriorSpec& spec);

}  // namespace sparsedet
