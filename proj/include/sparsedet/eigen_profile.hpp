#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sparsedet {

// ============================================================================
// Per-column eigenvalue sequences mu_1 >= mu_2 >= ... defining the
// coefficient ellipsoid sum_k theta_k^2 / mu_k <= 1. Convention: mu_1 = 1.
// ============================================================================

enum class ProfileKind { Sobolev, FiniteRank, ExpDecay, Explicit };

struct EigenProfile {
    ProfileKind kind = ProfileKind::Sobolev;
    double alpha = 1.0;            // Sobolev: mu_k = k^(-2 alpha), alpha > 0
    std::int64_t rank = 1;         // FiniteRank: mu_k = 1{k <= rank}
    double c2 = 1.0;               // ExpDecay: mu_k = exp(-c2 (k^gamma - 1))
    double gamma = 1.0;            //   (normalized so mu_1 = 1)
    std::vector<double> values;    // Explicit: listed entries, zero beyond

    static EigenProfile sobolev(double alpha);
    static EigenProfile finite_rank(std::int64_t rank);
    static EigenProfile exp_decay(double c2, double gamma);
    static EigenProfile explicit_seq(std::vector<double> values);
};

// k is 1-based. Entries past an Explicit profile's list are zero.
double eigenvalue(const EigenProfile& profile, std::int64_t k);

// Throws InvalidProfile when parameters are out of range, mu_1 != 1, or the
// sequence increases anywhere on a probe range (full range for Explicit).
void validate(const EigenProfile& profile);

// "sobolev" / "finite-rank" / "exp-decay" / "explicit"; used by config and
// CSV output.
std::string profile_name(const EigenProfile& profile);

}  // namespace sparsedet
