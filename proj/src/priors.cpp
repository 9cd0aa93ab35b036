#include "sparsedet/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sparsedet/errors.hpp"

namespace sparsedet {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double log_cosh(double x) {
    const double ax = std::fabs(x);
    return ax + std::log1p(std::exp(-2.0 * ax)) - kLn2;
}

double log_choose(std::int64_t m, std::int64_t k) {
    if (k < 0 || k > m) return -std::numeric_limits<double>::infinity();
    return std::lgamma(static_cast<double>(m) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(m - k) + 1.0);
}

// Uniform s-subset of {1..p} by Floyd's algorithm; returned sorted.
std::vector<std::int64_t> floyd_subset(std::int64_t p, std::int64_t s,
                                       SubStream& rng) {
    std::set<std::int64_t> chosen;
    for (std::int64_t j = p - s + 1; j <= p; ++j) {
        const auto t = static_cast<std::int64_t>(
                           rng.uniform_below(static_cast<std::uint64_t>(j))) +
                       1;
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

// Signal shape shared by the fixed-truncation kinds: `rows` leading rows at
// per-entry magnitude c * rho.
struct FixedShape {
    std::int64_t rows = 0;
    double rho = 0.0;
    bool signed_entries = true;
};

FixedShape fixed_shape(const PriorSpec& spec) {
    const ProblemDims& d = spec.dims;
    switch (spec.kind) {
        case PriorKind::SpikeFixed:
            return {1, 1.0, false};
        case PriorKind::SpikeSigned:
            // Per-column signal c^2 L / n places the draw at the sparse-tail
            // separation radius c^2 (s/n) L.
            return {1, std::sqrt(log_term(d) / static_cast<double>(d.n)),
                    true};
        case PriorKind::BulkSigned: {
            const std::int64_t nu = truncation_order(spec.profile, d);
            if (nu < 2)
                throw InfeasibleSpec(
                    "bulk prior needs truncation order >= 2; got 1");
            const double gamma = rate_envelope(spec.profile, d);
            return {nu - 1, std::sqrt(gamma / static_cast<double>(nu)), true};
        }
        default:
            throw ConfigError("prior kind has no fixed shape");
    }
}

// Per-truncation layout of the sparsity-adaptive prior: the restricted
// dyadic grid, and for each bucket v the matched sparsity, truncation, and
// per-entry scale (amplitude sqrt(2) c rho on rows below the truncation).
struct AdaptiveLayout {
    double cost = 1.0;
    std::vector<std::int64_t> v_grid;
    std::vector<std::int64_t> s_of;
    std::vector<std::int64_t> nu_of;
    std::vector<double> rho_of;
};

AdaptiveLayout adaptive_layout(const PriorSpec& spec) {
    const std::int64_t p = spec.dims.p;
    const std::int64_t n = spec.dims.n;
    AdaptiveLayout out;
    out.cost = adaptation_fixed_point(spec.profile, p, n).cost;
    out.v_grid = restricted_truncation_grid(spec.profile, p, n, out.cost);
    if (out.v_grid.empty())
        throw InfeasibleSpec("adaptive prior: empty restricted grid");
    const double root = std::sqrt(static_cast<double>(p) * out.cost);
    std::int64_t s_min = static_cast<std::int64_t>(std::ceil(root));
    s_min = std::clamp<std::int64_t>(s_min, 1, p);
    for (std::int64_t v : out.v_grid) {
        // Smallest s >= s_min whose truncation order lands in (v/2, v];
        // the order is nondecreasing in s, so bisect the first crossing.
        auto nu_at = [&](std::int64_t s) {
            return truncation_order(spec.profile, {p, s, n}, out.cost);
        };
        std::int64_t lo = s_min, hi = p;
        if (nu_at(lo) <= v / 2) {
            while (lo < hi) {
                const std::int64_t mid = lo + (hi - lo) / 2;
                if (nu_at(mid) > v / 2)
                    hi = mid;
                else
                    lo = mid + 1;
            }
        }
        const std::int64_t s = lo;
        const std::int64_t nu = nu_at(s);
        if (nu <= v / 2 || nu > v)
            throw InfeasibleSpec(
                "adaptive prior: no sparsity matches a grid bucket");
        const double sd = static_cast<double>(s);
        const double psi_sq =
            sd / static_cast<double>(n) *
            std::sqrt(static_cast<double>(nu) * log_term({p, s, n}, out.cost));
        out.s_of.push_back(s);
        out.nu_of.push_back(nu);
        out.rho_of.push_back(
            std::sqrt(psi_sq / sd / static_cast<double>(nu)));
    }
    return out;
}

// Per-truncation layout of the smoothness-scan priors: dyadic grid between
// the window's endpoints, the smoothness each bucket represents, and the
// per-entry scale placing the draw exactly on the adaptive rate.
struct ScanLayout {
    double base = 0.0;  // calibration ratio B; nu = B^{2/(4 alpha + 1)}
    std::vector<std::int64_t> nu_grid;
    std::vector<double> alpha_of;
    std::vector<double> rho_of;
};

ScanLayout scan_layout(const PriorSpec& spec) {
    const double p = static_cast<double>(spec.dims.p);
    const double s = static_cast<double>(spec.dims.s);
    const double n = static_cast<double>(spec.dims.n);
    if (!(spec.alpha1 >= spec.alpha0) || spec.alpha0 <= 0.0)
        throw InfeasibleSpec("smoothness window must satisfy 0 < a0 <= a1");
    ScanLayout out;
    if (spec.kind == PriorKind::SobolevDense) {
        out.base = n * s / std::sqrt(p * loglog_floored(n * p));
    } else {
        out.base = n / std::sqrt(std::max(std::log(p * loglog_floored(n)), 1.0));
    }
    if (!(out.base > 1.0))
        throw InfeasibleSpec("smoothness scan needs calibration ratio > 1");
    const double lb = std::log2(out.base);
    const auto k_lo = static_cast<std::int64_t>(
        std::ceil(2.0 * lb / (4.0 * spec.alpha1 + 1.0) - 1e-12));
    const auto k_hi = static_cast<std::int64_t>(
        std::floor(2.0 * lb / (4.0 * spec.alpha0 + 1.0) + 1e-12));
    if (k_lo > k_hi)
        throw InfeasibleSpec("smoothness window admits no dyadic truncation");
    for (std::int64_t k = std::max<std::int64_t>(k_lo, 1); k <= k_hi; ++k) {
        const auto nu = static_cast<std::int64_t>(1) << k;
        const double alpha = std::clamp(
            (2.0 * std::log(out.base) / std::log(static_cast<double>(nu)) -
             1.0) /
                4.0,
            spec.alpha0, spec.alpha1);
        out.nu_grid.push_back(nu);
        out.alpha_of.push_back(alpha);
        out.rho_of.push_back(std::exp(-(2.0 * alpha + 1.0) /
                                      (4.0 * alpha + 1.0) *
                                      std::log(out.base)));
    }
    if (out.nu_grid.empty())
        throw InfeasibleSpec("smoothness window admits no dyadic truncation");
    return out;
}

bool is_scan(PriorKind kind) {
    return kind == PriorKind::SobolevDense || kind == PriorKind::SobolevSparse;
}

// Largest amplitude keeping one column inside the ellipsoid when `rows`
// entries of magnitude rho occupy rows 1..rows.
double cap_for_rows(const EigenProfile& profile, std::int64_t rows,
                    double rho) {
    double weight = 0.0;
    for (std::int64_t k = 1; k <= rows; ++k)
        weight += 1.0 / eigenvalue(profile, k);
    if (weight == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (rho * std::sqrt(weight));
}

void check_amplitude(const PriorSpec& spec) {
    const double cap = admissible_amplitude(spec);
    if (!(spec.c <= cap * (1.0 + 1e-9)))
        throw InfeasibleSpec("prior amplitude " + std::to_string(spec.c) +
                             " exceeds ellipsoid cap " + std::to_string(cap));
}

void fill_columns(CoefficientMatrix& theta,
                  const std::vector<std::int64_t>& support,
                  std::int64_t rows, double magnitude, bool signed_entries,
                  SubStream& rng) {
    for (std::int64_t j : support)
        for (std::int64_t k = 1; k <= rows; ++k) {
            const double sign =
                signed_entries ? (rng.coin() ? 1.0 : -1.0) : 1.0;
            theta.theta[static_cast<std::size_t>((k - 1) * theta.p + j - 1)] =
                sign * magnitude;
        }
}

// Per-overlap-unit log moment factor: the exact divergence is
// E[exp(lambda |S ^ S'|)] over the hypergeometric overlap.
double overlap_log_factor(const PriorSpec& spec) {
    const double n = static_cast<double>(spec.dims.n);
    switch (spec.kind) {
        case PriorKind::SpikeFixed:
            return n * spec.c * spec.c;
        case PriorKind::SpikeSigned: {
            const FixedShape sh = fixed_shape(spec);
            return log_cosh(n * spec.c * spec.c * sh.rho * sh.rho);
        }
        case PriorKind::BulkSigned: {
            const FixedShape sh = fixed_shape(spec);
            return static_cast<double>(sh.rows) *
                   log_cosh(n * spec.c * spec.c * sh.rho * sh.rho);
        }
        default:
            throw ConfigError(
                "divergence in closed form needs an overlap-structured "
                "prior (spike or bulk)");
    }
}

}  // namespace

double CoefficientMatrix::squared_norm() const {
    double out = 0.0;
    for (double v : theta) out += v * v;
    return out;
}

std::string prior_name(PriorKind kind) {
    switch (kind) {
        case PriorKind::SpikeFixed: return "spike-fixed";
        case PriorKind::SpikeSigned: return "spike-signed";
        case PriorKind::BulkSigned: return "bulk-signed";
        case PriorKind::AdaptiveBulk: return "adaptive-bulk";
        case PriorKind::SobolevDense: return "sobolev-dense";
        case PriorKind::SobolevSparse: return "sobolev-sparse";
    }
    return "unknown";
}

PriorKind prior_kind_from_name(const std::string& name) {
    if (name == "spike-fixed") return PriorKind::SpikeFixed;
    if (name == "spike-signed") return PriorKind::SpikeSigned;
    if (name == "bulk-signed") return PriorKind::BulkSigned;
    if (name == "adaptive-bulk") return PriorKind::AdaptiveBulk;
    if (name == "sobolev-dense") return PriorKind::SobolevDense;
    if (name == "sobolev-sparse") return PriorKind::SobolevSparse;
    throw ConfigError("unknown prior kind: " + name);
}

double admissible_amplitude(const PriorSpec& spec) {
    switch (spec.kind) {
        case PriorKind::SpikeFixed:
        case PriorKind::SpikeSigned:
        case PriorKind::BulkSigned: {
            const FixedShape sh = fixed_shape(spec);
            return cap_for_rows(spec.profile, sh.rows, sh.rho);
        }
        case PriorKind::AdaptiveBulk: {
            const AdaptiveLayout lay = adaptive_layout(spec);
            double cap = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < lay.v_grid.size(); ++i)
                cap = std::min(cap,
                               cap_for_rows(spec.profile, lay.nu_of[i] - 1,
                                            std::sqrt(2.0) * lay.rho_of[i]));
            return cap;
        }
        case PriorKind::SobolevDense:
        case PriorKind::SobolevSparse: {
            const ScanLayout lay = scan_layout(spec);
            double cap = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < lay.nu_grid.size(); ++i) {
                double weight = 0.0;
                for (std::int64_t k = 1; k <= lay.nu_grid[i]; ++k)
                    weight += std::pow(static_cast<double>(k),
                                       2.0 * lay.alpha_of[i]);
                cap = std::min(cap,
                               1.0 / (lay.rho_of[i] * std::sqrt(weight)));
            }
            return cap;
        }
    }
    throw ConfigError("unknown prior kind");
}

CoefficientMatrix sample_prior(const PriorSpec& spec, SubStream& rng) {
    validate(spec.dims);
    if (!is_scan(spec.kind)) validate(spec.profile);
    check_amplitude(spec);

    CoefficientMatrix out;
    out.p = spec.dims.p;
    switch (spec.kind) {
        case PriorKind::SpikeFixed:
        case PriorKind::SpikeSigned:
        case PriorKind::BulkSigned: {
            const FixedShape sh = fixed_shape(spec);
            out.rows = sh.rows;
            out.theta.assign(static_cast<std::size_t>(out.rows * out.p), 0.0);
            const auto support = floyd_subset(spec.dims.p, spec.dims.s, rng);
            fill_columns(out, support, sh.rows, spec.c * sh.rho,
                         sh.signed_entries, rng);
            return out;
        }
        case PriorKind::AdaptiveBulk: {
            const AdaptiveLayout lay = adaptive_layout(spec);
            const auto i = static_cast<std::size_t>(
                rng.uniform_below(lay.v_grid.size()));
            out.rows = lay.nu_of[i] - 1;
            out.theta.assign(static_cast<std::size_t>(out.rows * out.p), 0.0);
            const auto support = floyd_subset(spec.dims.p, lay.s_of[i], rng);
            fill_columns(out, support, out.rows,
                         std::sqrt(2.0) * spec.c * lay.rho_of[i], true, rng);
            return out;
        }
        case PriorKind::SobolevDense:
        case PriorKind::SobolevSparse: {
            const ScanLayout lay = scan_layout(spec);
            const auto i = static_cast<std::size_t>(
                rng.uniform_below(lay.nu_grid.size()));
            out.rows = lay.nu_grid[i];
            out.theta.assign(static_cast<std::size_t>(out.rows * out.p), 0.0);
            const auto support = floyd_subset(spec.dims.p, spec.dims.s, rng);
            fill_columns(out, support, out.rows, spec.c * lay.rho_of[i], true,
                         rng);
            return out;
        }
    }
    throw ConfigError("unknown prior kind");
}

bool in_parameter_space(const CoefficientMatrix& theta,
                        const EigenProfile& profile, const ProblemDims& dims,
                        double rel_slack) {
    if (theta.p != dims.p) return false;
    std::int64_t active = 0;
    for (std::int64_t j = 1; j <= theta.p; ++j) {
        bool any = false;
        double sum = 0.0;
        for (std::int64_t k = 1; k <= theta.rows; ++k) {
            const double v = theta.at(k, j);
            if (v == 0.0) continue;
            any = true;
            const double mu = eigenvalue(profile, k);
            if (mu == 0.0) return false;
            sum += v * v / mu;
        }
        if (!any) continue;
        ++active;
        if (sum > 1.0 + rel_slack) return false;
    }
    return active <= dims.s;
}

bool draw_in_class(const PriorSpec& spec, const CoefficientMatrix& theta,
                   double rel_slack) {
    if (is_scan(spec.kind)) {
        // The drawn truncation fixes the smoothness the class is defined by.
        const ScanLayout lay = scan_layout(spec);
        const auto it = std::find(lay.nu_grid.begin(), lay.nu_grid.end(),
                                  theta.rows);
        if (it == lay.nu_grid.end()) return false;
        const double alpha = lay.alpha_of[static_cast<std::size_t>(
            it - lay.nu_grid.begin())];
        std::int64_t active = 0;
        for (std::int64_t j = 1; j <= theta.p; ++j) {
            bool any = false;
            double sum = 0.0;
            for (std::int64_t k = 1; k <= theta.rows; ++k) {
                const double v = theta.at(k, j);
                if (v == 0.0) continue;
                any = true;
                sum += v * v *
                       std::pow(static_cast<double>(k), 2.0 * alpha);
            }
            if (!any) continue;
            ++active;
            if (sum > 1.0 + rel_slack) return false;
        }
        return active <= spec.dims.s;
    }
    if (spec.kind == PriorKind::AdaptiveBulk) {
        // Sparsity is drawn: membership requires the support to sit in the
        // scanned range [sqrt(p * cost), p].
        const double cost = adaptation_fixed_point(spec.profile, spec.dims.p,
                                                   spec.dims.n)
                                .cost;
        std::int64_t active = 0;
        for (std::int64_t j = 1; j <= theta.p; ++j)
            for (std::int64_t k = 1; k <= theta.rows; ++k)
                if (theta.at(k, j) != 0.0) {
                    ++active;
                    break;
                }
        if (static_cast<double>(active) * static_cast<double>(active) <
            static_cast<double>(spec.dims.p) * cost * (1.0 - 1e-12))
            return false;
        return in_parameter_space(theta, spec.profile,
                                  {spec.dims.p, spec.dims.p, spec.dims.n},
                                  rel_slack);
    }
    return in_parameter_space(theta, spec.profile, spec.dims, rel_slack);
}

double mixture_chi2_divergence_exact(const PriorSpec& spec) {
    const std::int64_t p = spec.dims.p;
    const std::int64_t s = spec.dims.s;
    if (p > 10000 || s > 100)
        throw EnumerationTooLarge(
            "exact divergence gated at p <= 1e4, s <= 100");
    check_amplitude(spec);
    const double lambda = overlap_log_factor(spec);

    // E[exp(lambda K)] - 1 with K the overlap of two uniform s-subsets.
    const double denom = log_choose(p, s);
    double log_e = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k <= s; ++k) {
        const double log_pk =
            log_choose(s, k) + log_choose(p - s, s - k) - denom;
        const double term = log_pk + lambda * static_cast<double>(k);
        if (!std::isfinite(term)) continue;  // overlap k impossible
        if (std::isinf(log_e))
            log_e = term;
        else
            log_e = std::max(log_e, term) +
                    std::log1p(std::exp(-std::fabs(log_e - term)));
    }
    return std::expm1(log_e);
}

double mixture_chi2_divergence_bound(const PriorSpec& spec) {
    check_amplitude(spec);
    const double lambda = overlap_log_factor(spec);
    const double p = static_cast<double>(spec.dims.p);
    const double s = static_cast<double>(spec.dims.s);
    // s * log(1 - s/p + (s/p) e^lambda), assembled in log space.
    const double big = std::log(s / p) + lambda;
    double inner;
    if (s < p) {
        const double small = std::log1p(-s / p);
        const double m = std::max(small, big);
        inner = m + std::log1p(std::exp(std::min(small, big) - m));
    } else {
        inner = lambda;
    }
    return std::expm1(s * inner);
}

DivergenceEstimate mixture_chi2_divergence_mc(const PriorSpec& spec,
                                              std::int64_t reps,
                                              std::uint64_t seed) {
    if (reps < 2) throw InsufficientReps("divergence MC needs reps >= 2");
    double mean = 0.0, m2 = 0.0;
    for (std::int64_t i = 0; i < reps; ++i) {
        SubStream first(seed, 2 * static_cast<std::uint64_t>(i),
                        RngDomain::Prior);
        SubStream second(seed, 2 * static_cast<std::uint64_t>(i) + 1,
                         RngDomain::Prior);
        const CoefficientMatrix a = sample_prior(spec, first);
        const CoefficientMatrix b = sample_prior(spec, second);
        const std::int64_t rows = std::min(a.rows, b.rows);
        double dot = 0.0;
        for (std::int64_t k = 1; k <= rows; ++k)
            for (std::int64_t j = 1; j <= a.p; ++j)
                dot += a.at(k, j) * b.at(k, j);
        const double v = std::exp(static_cast<double>(spec.dims.n) * dot);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double var = m2 / static_cast<double>(reps - 1);
    return {mean - 1.0,
            std::sqrt(var / static_cast<double>(reps))};
}

double risk_lower_bound_from_divergence(double divergence) {
    const double risk = 1.0 - 0.5 * std::sqrt(std::max(divergence, 0.0));
    return std::clamp(risk, 0.0, 1.0);
}

double unit_norm_sq(const PriorSpec& spec) {
    switch (spec.kind) {
        case PriorKind::SpikeFixed:
        case PriorKind::SpikeSigned:
        case PriorKind::BulkSigned: {
            const FixedShape sh = fixed_shape(spec);
            return static_cast<double>(spec.dims.s) *
                   static_cast<double>(sh.rows) * sh.rho * sh.rho;
        }
        default:
            throw ConfigError(
                "norm scaling applies to the fixed-shape priors only; the "
                "scan priors take c in separation-radius units");
    }
}

double amplitude_for_norm(const PriorSpec& spec, double target_norm_sq) {
    if (!(target_norm_sq >= 0.0))
        throw ConfigError("target squared norm must be nonnegative");
    return std::sqrt(target_norm_sq / unit_norm_sq(spec));
}

std::int64_t prior_max_rows(const PriorSpec& spec) {
    switch (spec.kind) {
        case PriorKind::SpikeFixed:
        case PriorKind::SpikeSigned:
        case PriorKind::BulkSigned:
            return fixed_shape(spec).rows;
        case PriorKind::AdaptiveBulk: {
            const AdaptiveLayout lay = adaptive_layout(spec);
            std::int64_t rows = 0;
            for (std::int64_t nu : lay.nu_of) rows = std::max(rows, nu - 1);
            return rows;
        }
        case PriorKind::SobolevDense:
        case PriorKind::SobolevSparse: {
            const ScanLayout lay = scan_layout(spec);
            return lay.nu_grid.back();
        }
    }
    throw ConfigError("unknown prior kind");
}

}  // namespace sparsedet
