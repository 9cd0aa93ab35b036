#include "sparsedet/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "sparsedet/errors.hpp"

namespace sparsedet {

namespace {

// Run fn(rep) for rep in [0, reps), strided across up to `jobs` threads.
// Callers make fn write only to per-rep slots or atomics, so the result is
// schedule-independent.
template <typename Fn>
void for_each_rep(std::int64_t reps, int jobs, Fn fn) {
    auto workers = static_cast<std::int64_t>(std::clamp(jobs, 1, 256));
    workers = std::min(workers, std::max<std::int64_t>(reps, 1));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < reps; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w)
        pool.emplace_back([=] {
            for (std::int64_t i = w; i < reps; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

const CoefficientMatrix kNullSignal{};

}  // namespace

Observation make_observation(const CoefficientMatrix& theta, std::int64_t p,
                             std::int64_t n, std::int64_t k_max,
                             std::uint64_t seed, std::uint64_t rep,
                             RngDomain domain) {
    if (theta.rows > 0 && theta.p != p)
        throw DimensionMismatch("signal width != observation width");
    if (theta.rows > k_max)
        throw DimensionMismatch("observation too shallow for the signal");
    if (k_max < 1 || p < 1 || n < 1)
        throw DimensionMismatch("observation shape must be positive");
    Observation obs;
    obs.k_max = k_max;
    obs.p = p;
    obs.n = n;
    obs.x.resize(static_cast<std::size_t>(k_max * p));
    const NoiseField field(seed, rep, domain);
    const double sd = 1.0 / std::sqrt(static_cast<double>(n));
    std::size_t idx = 0;
    for (std::int64_t k = 1; k <= k_max; ++k) {
        const bool live = k <= theta.rows;
        for (std::int64_t j = 1; j <= p; ++j, ++idx) {
            const double mean = live ? theta.at(k, j) : 0.0;
            obs.x[idx] = mean + sd * field.normal(
                                          static_cast<std::uint64_t>(k),
                                          static_cast<std::uint64_t>(j));
        }
    }
    return obs;
}

double calibrate_threshold(const StatisticId& id, double level,
                           const McOptions& opt, CalibrationTable* table) {
    if (!(level > 0.0 && level < 1.0))
        throw ConfigError("calibration level must lie in (0, 1)");
    const auto reps = opt.reps;
    if (static_cast<double>(reps) * level < 10.0)
        throw InsufficientReps("calibration needs reps >= 10 / level");

    const std::int64_t rows = required_rows(id);
    const std::int64_t n_sim =
        id.kind == StatisticId::Kind::SmoothnessMax ? id.n : 1;
    std::vector<double> vals(static_cast<std::size_t>(reps));
    for_each_rep(reps, opt.jobs, [&](std::int64_t rep) {
        const Observation obs =
            make_observation(kNullSignal, id.p, n_sim, rows, opt.seed,
                             static_cast<std::uint64_t>(rep));
        vals[static_cast<std::size_t>(rep)] = evaluate_statistic(id, obs);
    });
    std::sort(vals.begin(), vals.end());

    // Largest rejection count the level affords, then the smallest cut that
    // stays within it even when the sample has ties at the boundary.
    const auto allowed =
        static_cast<std::int64_t>(std::floor(level * static_cast<double>(reps)));
    const double cut = vals[static_cast<std::size_t>(reps - allowed - 1)];
    const auto it = std::upper_bound(vals.begin(), vals.end(), cut);
    const double threshold =
        it != vals.end()
            ? *it
            : std::nextafter(cut, std::numeric_limits<double>::infinity());

    if (table != nullptr)
        table->insert({id, level, threshold, reps, opt.seed});
    return threshold;
}

WilsonInterval wilson_interval(std::int64_t hits, std::int64_t reps) {
    const double z = 1.959963984540054;  // two-sided 95%
    const double nn = static_cast<double>(reps);
    const double ph = static_cast<double>(hits) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (ph + z2 / (2.0 * nn)) / denom;
    const double half =
        z * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

RiskEstimate estimate_risk(const TestSpec& spec, const Alternative& alt,
                           const ProblemDims& dims, const McOptions& opt) {
    validate(dims);
    if (opt.reps < 1) throw ConfigError("risk estimation needs reps >= 1");

    const std::int64_t rows_needed = required_rows(spec);
    std::int64_t alt_rows = 0;
    if (const auto* matrix = std::get_if<CoefficientMatrix>(&alt)) {
        if (matrix->rows > 0 && matrix->p != dims.p)
            throw DimensionMismatch("alternative width != dims.p");
        alt_rows = matrix->rows;
    } else {
        const auto& prior = std::get<PriorSpec>(alt);
        if (prior.dims.p != dims.p)
            throw DimensionMismatch("prior width != dims.p");
        alt_rows = prior_max_rows(prior);
    }

    std::int64_t k_max = std::max({std::int64_t{64}, rows_needed, alt_rows});
    if (opt.k_max > 0) {
        if (opt.k_max < std::max(rows_needed, alt_rows))
            throw DimensionMismatch("k_max too shallow for the test or signal");
        k_max = opt.k_max;
    }

    std::atomic<std::int64_t> rejected{0};
    for_each_rep(opt.reps, opt.jobs, [&](std::int64_t rep) {
        const Observation obs =
            make_observation(kNullSignal, dims.p, dims.n, k_max, opt.seed,
                             static_cast<std::uint64_t>(rep));
        if (decide(spec, obs) == 1) rejected.fetch_add(1);
    });

    std::atomic<std::int64_t> accepted{0};
    for_each_rep(opt.reps, opt.jobs, [&](std::int64_t rep) {
        Observation obs;
        if (const auto* matrix = std::get_if<CoefficientMatrix>(&alt)) {
            obs = make_observation(*matrix, dims.p, dims.n, k_max, opt.seed,
                                   static_cast<std::uint64_t>(rep),
                                   RngDomain::AltNoise);
        } else {
            SubStream draws(opt.seed, static_cast<std::uint64_t>(rep),
                            RngDomain::Prior);
            const CoefficientMatrix theta =
                sample_prior(std::get<PriorSpec>(alt), draws);
            obs = make_observation(theta, dims.p, dims.n, k_max, opt.seed,
                                   static_cast<std::uint64_t>(rep),
                                   RngDomain::AltNoise);
        }
        if (decide(spec, obs) == 0) accepted.fetch_add(1);
    });

    RiskEstimate est;
    est.reps = opt.reps;
    est.seed = opt.seed;
    est.type1 = static_cast<double>(rejected.load()) /
                static_cast<double>(opt.reps);
    est.type2 = static_cast<double>(accepted.load()) /
                static_cast<double>(opt.reps);
    est.total = est.type1 + est.type2;
    const WilsonInterval w1 = wilson_interval(rejected.load(), opt.reps);
    const WilsonInterval w2 = wilson_interval(accepted.load(), opt.reps);
    est.ci1_half_width = 0.5 * (w1.hi - w1.lo);
    est.ci2_half_width = 0.5 * (w2.hi - w2.lo);
    est.ci_half_width = est.ci1_half_width + est.ci2_half_width;
    if (const auto* prior = std::get_if<PriorSpec>(&alt))
        est.truncation_bias = static_cast<double>(dims.s) *
                              eigenvalue(prior->profile, k_max + 1);
    return est;
}

std::vector<PowerPoint> power_curve(const TestSpec& spec, PriorKind kind,
                                    const EigenProfile& profile,
                                    const ProblemDims& dims,
                                    const std::vector<double>& scales,
                                    const McOptions& opt) {
    if (scales.empty()) throw ConfigError("scale grid must be nonempty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] >= 0.0))
            throw ConfigError("scale grid must be nonnegative");
        if (i > 0 && !(scales[i] > scales[i - 1]))
            throw ConfigError("scale grid must be increasing");
    }

    const double eps_sq = separation_rate(profile, dims).eps_sq;
    PriorSpec proto;
    proto.kind = kind;
    proto.profile = profile;
    proto.dims = dims;
    proto.c = 1.0;
    const double base_c = amplitude_for_norm(proto, eps_sq);

    std::vector<PowerPoint> out;
    out.reserve(scales.size());
    for (double scale : scales) {
        PriorSpec point = proto;
        point.c = scale * base_c;
        PowerPoint pp;
        pp.scale = scale;
        pp.amplitude = point.c;
        pp.risk = estimate_risk(spec, Alternative{point}, dims, opt);
        out.push_back(pp);
    }
    return out;
}

}  // namespace sparsedet
