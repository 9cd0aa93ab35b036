#include "sparsedet/eigen_profile.hpp"

#include <cmath>

#include "sparsedet/errors.hpp"

namespace sparsedet {

EigenProfile EigenProfile::sobolev(double alpha) {
    EigenProfile p;
    p.kind = ProfileKind::Sobolev;
    p.alpha = alpha;
    return p;
}

EigenProfile EigenProfile::finite_rank(std::int64_t rank) {
    EigenProfile p;
    p.kind = ProfileKind::FiniteRank;
    p.rank = rank;
    return p;
}

EigenProfile EigenProfile::exp_decay(double c2, double gamma) {
    EigenProfile p;
    p.kind = ProfileKind::ExpDecay;
    p.c2 = c2;
    p.gamma = gamma;
    return p;
}

EigenProfile EigenProfile::explicit_seq(std::vector<double> values) {
    EigenProfile p;
    p.kind = ProfileKind::Explicit;
    p.values = std::move(values);
    return p;
}

double eigenvalue(const EigenProfile& profile, std::int64_t k) {
    switch (profile.kind) {
        case ProfileKind::Sobolev:
            return std::exp(-2.0 * profile.alpha *
                            std::log(static_cast<double>(k)));
        case ProfileKind::FiniteRank:
            return k <= profile.rank ? 1.0 : 0.0;
        case ProfileKind::ExpDecay:
            return std::exp(-profile.c2 *
                            (std::pow(static_cast<double>(k), profile.gamma) -
                             1.0));
        case ProfileKind::Explicit:
            return k <= static_cast<std::int64_t>(profile.values.size())
                       ? profile.values[static_cast<std::size_t>(k - 1)]
                       : 0.0;
    }
    return 0.0;
}

void validate(const EigenProfile& profile) {
    switch (profile.kind) {
        case ProfileKind::Sobolev:
            if (!(profile.alpha > 0.0) || !std::isfinite(profile.alpha))
                throw InvalidProfile("sobolev profile needs alpha > 0");
            break;
        case ProfileKind::FiniteRank:
            if (profile.rank < 1)
                throw InvalidProfile("finite-rank profile needs rank >= 1");
            break;
        case ProfileKind::ExpDecay:
            if (!(profile.c2 > 0.0) || !(profile.gamma > 0.0) ||
                !std::isfinite(profile.c2) || !std::isfinite(profile.gamma))
                throw InvalidProfile("exp-decay profile needs c2 > 0, gamma > 0");
            break;
        case ProfileKind::Explicit: {
            if (profile.values.empty())
                throw InvalidProfile("explicit profile needs at least one entry");
            if (profile.values.front() != 1.0)
                throw InvalidProfile("explicit profile must start at mu_1 = 1");
            double prev = profile.values.front();
            for (double v : profile.values) {
                if (!(v >= 0.0) || v > 1.0 || !std::isfinite(v))
                    throw InvalidProfile("explicit profile entries must lie in [0, 1]");
                if (v > prev)
                    throw InvalidProfile("explicit profile must be nonincreasing");
                prev = v;
            }
            return;
        }
    }
    // Parametric families: mu_1 = 1 by construction; spot-check monotonicity
    // on a geometric probe out to 1e5.
    double prev = eigenvalue(profile, 1);
    if (prev != 1.0) throw InvalidProfile("profile must satisfy mu_1 = 1");
    for (std::int64_t k = 2; k <= 100000; k = (k < 64 ? k + 1 : k + k / 7)) {
        const double v = eigenvalue(profile, k);
        if (v > prev + 1e-15)
            throw InvalidProfile("profile must be nonincreasing in k");
        prev = v;
    }
}

std::string profile_name(const EigenProfile& profile) {
    switch (profile.kind) {
        case ProfileKind::Sobolev: return "sobolev";
        case ProfileKind::FiniteRank: return "finite-rank";
        case ProfileKind::ExpDecay: return "exp-decay";
        case ProfileKind::Explicit: return "explicit";
    }
    return "unknown";
}

}  // namespace sparsedet
