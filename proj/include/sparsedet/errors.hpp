#pragma once

#include <stdexcept>
#include <string>

namespace sparsedet {

// Error taxonomy for the library. Each condition that callers are expected
// to handle separately gets its own type; everything derives from Error so
// the CLI can catch one base.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Eigenvalue profile violates its contract (mu_1 != 1, increasing entries,
// out-of-range parameters).
struct InvalidProfile : Error {
    using Error::Error;
};

// A search exceeded its representable range (truncation order past 2^40).
struct Overflow : Error {
    using Error::Error;
};

// An iterative evaluation (continued fraction, series) failed to reach its
// tolerance within the iteration budget.
struct NonConvergence : Error {
    using Error::Error;
};

// A tail quantity underflowed even in log space.
struct Underflow : Error {
    using Error::Error;
};

// A test builder asked for a threshold the calibration table does not hold.
struct MissingCalibration : Error {
    using Error::Error;
};

// A prior specification cannot produce draws inside the parameter space.
struct InfeasibleSpec : Error {
    using Error::Error;
};

// Exact divergence enumeration refused (dimensions past the documented cap).
struct EnumerationTooLarge : Error {
    using Error::Error;
};

// Monte Carlo replication count too small for the requested quantile.
struct InsufficientReps : Error {
    using Error::Error;
};

// Observation shape incompatible with the statistic evaluated on it.
struct DimensionMismatch : Error {
    using Error::Error;
};

// Config file missing, malformed, or a field out of range. Message names
// the offending field.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace sparsedet
