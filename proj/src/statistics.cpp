#include "sparsedet/statistics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "sparsedet/errors.hpp"
#include "sparsedet/simd.hpp"
#include "sparsedet/special_functions.hpp"

namespace sparsedet {

namespace {

void check_width(const Observation& obs, std::int64_t p) {
    if (obs.p != p)
        throw DimensionMismatch("observation width does not match statistic");
}

void check_depth(const Observation& obs, std::int64_t rows) {
    if (rows > obs.k_max)
        throw DimensionMismatch("observation has fewer rows than the statistic reads");
}

}  // namespace

std::vector<double> coordinate_energies(const Observation& obs,
                                        std::int64_t d) {
    check_depth(obs, d);
    std::vector<double> e(static_cast<std::size_t>(obs.p), 0.0);
    const auto& kernels = simd::active_kernels();
    kernels.accumulate_col_sumsq(obs.x.data(), static_cast<std::size_t>(d),
                                 static_cast<std::size_t>(obs.p), e.data());
    const double n = static_cast<double>(obs.n);
    for (double& v : e) v *= n;
    return e;
}

double thresholded_statistic(const Observation& obs, std::int64_t d,
                             double r) {
    const std::vector<double> e = coordinate_energies(obs, d);
    const double cutoff = static_cast<double>(d) + r * r;
    const double centre = conditional_null_mean(static_cast<double>(d), r);
    const auto& kernels = simd::active_kernels();
    return kernels.thresholded_centered_sum(e.data(), e.size(), cutoff, centre);
}

double dense_statistic(const Observation& obs, std::int64_t nu) {
    check_depth(obs, nu);
    const auto& kernels = simd::active_kernels();
    const double raw = kernels.sumsq(obs.x.data(),
                                     static_cast<std::size_t>(nu * obs.p));
    return static_cast<double>(obs.n) * raw;
}

// ---------------------------------------------------------------------------
// Statistic identities
// ---------------------------------------------------------------------------

std::string StatisticId::canonical() const {
    char buf[160];
    switch (kind) {
        case Kind::Thresholded:
            std::snprintf(buf, sizeof buf, "thr;d=%" PRId64 ";r=%.17g;p=%" PRId64,
                          d, r, p);
            break;
        case Kind::Dense:
            std::snprintf(buf, sizeof buf, "dense;nu=%" PRId64 ";p=%" PRId64, nu,
                          p);
            break;
        case Kind::SmoothnessMax:
            std::snprintf(buf, sizeof buf,
                          "smax;nu=%" PRId64 ";p=%" PRId64 ";n=%" PRId64, nu, p,
                          n);
            break;
    }
    return buf;
}

std::int64_t required_rows(const StatisticId& id) {
    switch (id.kind) {
        case StatisticId::Kind::Thresholded: return id.d;
        case StatisticId::Kind::Dense: return id.nu;
        case StatisticId::Kind::SmoothnessMax: return id.nu;
    }
    return 0;
}

double evaluate_statistic(const StatisticId& id, const Observation& obs) {
    check_width(obs, id.p);
    switch (id.kind) {
        case StatisticId::Kind::Thresholded:
            return thresholded_statistic(obs, id.d, id.r);
        case StatisticId::Kind::Dense:
            return dense_statistic(obs, id.nu);
        case StatisticId::Kind::SmoothnessMax: {
            check_depth(obs, id.nu);
            const double ll =
                loglog_floored(static_cast<double>(id.n) *
                               static_cast<double>(id.p));
            double best = -std::numeric_limits<double>::infinity();
            for (std::int64_t nu = 1; nu <= id.nu; nu *= 2) {
                const double t = dense_statistic(obs, nu);
                const double np = static_cast<double>(nu) *
                                  static_cast<double>(id.p);
                const double pivot = (t - np) / (std::sqrt(np * ll) + ll);
                best = std::max(best, pivot);
            }
            return best;
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Calibration table
// ---------------------------------------------------------------------------

void CalibrationTable::insert(const CalibrationEntry& entry) {
    const std::string key = entry.id.canonical();
    for (const CalibrationEntry& other : entries_) {
        if (other.id.canonical() != key) continue;
        const bool ordered =
            (entry.level < other.level && entry.threshold >= other.threshold) ||
            (entry.level > other.level && entry.threshold <= other.threshold) ||
            entry.level == other.level;
        if (!ordered)
            throw InvalidProfile(
                "calibration entries must have thresholds nonincreasing in level");
    }
    auto it = index_.find({key, entry.level});
    if (it != index_.end()) {
        entries_[it->second] = entry;
        return;
    }
    index_[{key, entry.level}] = entries_.size();
    entries_.push_back(entry);
}

bool CalibrationTable::contains(const StatisticId& id, double level) const {
    return index_.count({id.canonical(), level}) > 0;
}

double CalibrationTable::lookup(const StatisticId& id, double level) const {
    auto it = index_.find({id.canonical(), level});
    if (it == index_.end())
        throw MissingCalibration("no calibrated threshold for " +
                                 id.canonical());
    return entries_[it->second].threshold;
}

namespace {

StatisticId parse_canonical(const std::string& key) {
    StatisticId id;
    if (std::sscanf(key.c_str(), "thr;d=%" SCNd64 ";r=%lg;p=%" SCNd64, &id.d,
                    &id.r, &id.p) == 3) {
        id.kind = StatisticId::Kind::Thresholded;
        return id;
    }
    if (std::sscanf(key.c_str(), "smax;nu=%" SCNd64 ";p=%" SCNd64 ";n=%" SCNd64,
                    &id.nu, &id.p, &id.n) == 3) {
        id.kind = StatisticId::Kind::SmoothnessMax;
        return id;
    }
    if (std::sscanf(key.c_str(), "dense;nu=%" SCNd64 ";p=%" SCNd64, &id.nu,
                    &id.p) == 2) {
        id.kind = StatisticId::Kind::Dense;
        return id;
    }
    throw ConfigError("unrecognized statistic key in calibration file: " + key);
}

}  // namespace

void CalibrationTable::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ConfigError("cannot write calibration file " + path);
        out << "statistic,level,threshold,reps,seed\n";
        char line[320];
        for (const CalibrationEntry& e : entries_) {
            std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%" PRId64 ",%llu\n",
                          e.id.canonical().c_str(), e.level, e.threshold, e.reps,
                          static_cast<unsigned long long>(e.seed));
            out << line;
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ConfigError("cannot move calibration file into place: " + path);
}

CalibrationTable CalibrationTable::load(const std::string& path) {
    CalibrationTable table;
    std::ifstream in(path);
    if (!in) return table;  // absent cache is an empty table
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        // Statistic keys contain no commas; split from the right: seed, reps,
        // threshold, level.
        const std::size_t c4 = line.rfind(',');
        const std::size_t c3 = line.rfind(',', c4 - 1);
        const std::size_t c2 = line.rfind(',', c3 - 1);
        const std::size_t c1 = line.rfind(',', c2 - 1);
        if (c1 == std::string::npos)
            throw ConfigError("malformed calibration row: " + line);
        CalibrationEntry e;
        e.id = parse_canonical(line.substr(0, c1));
        e.level = std::strtod(line.c_str() + c1 + 1, nullptr);
        e.threshold = std::strtod(line.c_str() + c2 + 1, nullptr);
        e.reps = std::strtoll(line.c_str() + c3 + 1, nullptr, 10);
        e.seed = std::strtoull(line.c_str() + c4 + 1, nullptr, 10);
        table.insert(e);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Decisions
// ---------------------------------------------------------------------------

std::int64_t required_rows(const TestSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::int64_t {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SparseThresholdTest>) {
                return s.d;
            } else if constexpr (std::is_same_v<T, DenseChi2Test>) {
                return s.nu;
            } else if constexpr (std::is_same_v<T, AdaptiveMaxTest>) {
                std::int64_t rows = 0;
                for (const auto& c : s.components)
                    rows = std::max(rows, required_rows(c.id));
                return rows;
            } else {
                return s.nu_grid.empty() ? 0 : s.nu_grid.back();
            }
        },
        spec);
}

int decide(const TestSpec& spec, const Observation& obs) {
    return std::visit(
        [&](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SparseThresholdTest>) {
                return thresholded_statistic(obs, s.d, s.r) >= s.threshold ? 1
                                                                           : 0;
            } else if constexpr (std::is_same_v<T, DenseChi2Test>) {
                return dense_statistic(obs, s.nu) >= s.threshold ? 1 : 0;
            } else if constexpr (std::is_same_v<T, AdaptiveMaxTest>) {
                for (const auto& c : s.components) {
                    if (evaluate_statistic(c.id, obs) >= c.threshold) return 1;
                }
                return 0;
            } else {
                check_width(obs, s.p);
                if (!s.nu_grid.empty()) check_depth(obs, s.nu_grid.back());
                StatisticId id;
                id.kind = StatisticId::Kind::SmoothnessMax;
                id.nu = s.nu_grid.empty() ? 1 : s.nu_grid.back();
                id.p = s.p;
                id.n = s.n;
                return evaluate_statistic(id, obs) >= s.k_mult ? 1 : 0;
            }
        },
        spec);
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

StatisticId sparse_test_id(const EigenProfile& profile,
                           const ProblemDims& dims, Regime regime,
                           const RatePolicy& policy) {
    if (regime != Regime::SparseBulk && regime != Regime::SparseTail)
        throw InvalidProfile("sparse test builder needs a sparse regime");
    StatisticId id;
    id.kind = StatisticId::Kind::Thresholded;
    id.d = std::max(truncation_order(profile, dims), policy.d_floor);
    const double lt = log_term(dims);
    id.r = (regime == Regime::SparseBulk)
               ? policy.k2 * std::pow(static_cast<double>(id.d) * lt, 0.25)
               : policy.k2 * std::sqrt(lt);
    id.p = dims.p;
    return id;
}

StatisticId dense_test_id(const EigenProfile& profile,
                          const ProblemDims& dims) {
    StatisticId id;
    id.kind = StatisticId::Kind::Dense;
    id.nu = truncation_order(profile, dims);
    id.p = dims.p;
    return id;
}

StatisticId smoothness_pivot_id(double alpha0, double alpha1, std::int64_t p,
                                std::int64_t n) {
    const SmoothnessAdaptiveRates r =
        smoothness_adaptive_rates(alpha0, alpha0, alpha1, p, 1, n);
    StatisticId id;
    id.kind = StatisticId::Kind::SmoothnessMax;
    id.nu = r.test_grid.back();
    id.p = p;
    id.n = n;
    return id;
}

SparseThresholdTest make_sparse_test(const EigenProfile& profile,
                                     const ProblemDims& dims, Regime regime,
                                     const CalibrationTable& table,
                                     double level, const RatePolicy& policy) {
    const StatisticId id = sparse_test_id(profile, dims, regime, policy);
    SparseThresholdTest t;
    t.d = id.d;
    t.r = id.r;
    t.threshold = table.lookup(id, level);
    return t;
}

DenseChi2Test make_dense_test(const EigenProfile& profile,
                              const ProblemDims& dims,
                              const CalibrationTable& table, double level,
                              const RatePolicy& policy) {
    (void)policy;
    const StatisticId id = dense_test_id(profile, dims);
    DenseChi2Test t;
    t.nu = id.nu;
    t.threshold = table.lookup(id, level);
    return t;
}

DenseChi2Test make_dense_test_analytic(const EigenProfile& profile,
                                       const ProblemDims& dims, double eta) {
    if (!(eta > 0.0) || !(eta < 1.0))
        throw InvalidProfile("dense test needs eta in (0, 1)");
    DenseChi2Test t;
    t.nu = truncation_order(profile, dims);
    const double pnu =
        static_cast<double>(dims.p) * static_cast<double>(t.nu);
    t.threshold = pnu + (2.0 / std::sqrt(eta)) * std::sqrt(pnu);
    return t;
}

std::vector<AdaptiveComponent> plan_adaptive_components(
    const EigenProfile& profile, std::int64_t p, std::int64_t n,
    const RatePolicy& policy) {
    const AdaptationResult fixed = adaptation_fixed_point(profile, p, n);
    const std::vector<std::int64_t> nus = fixed.grid;
    const std::vector<std::int64_t> sss = sparsity_grid(p, fixed.cost);
    const double scan_floor = std::sqrt(static_cast<double>(p) * fixed.cost);

    std::vector<AdaptiveComponent> out;
    std::vector<std::string> seen;
    const auto push_unique = [&](const AdaptiveComponent& c) {
        const std::string key = c.id.canonical();
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) return;
        seen.push_back(key);
        out.push_back(c);
    };

    for (std::int64_t s : sss) {
        for (std::int64_t nu : nus) {
            AdaptiveComponent c;
            c.s = s;
            if (static_cast<double>(s) >= scan_floor) {
                c.id.kind = StatisticId::Kind::Dense;
                c.id.nu = nu;
                c.id.p = p;
            } else {
                const std::int64_t d = std::max(nu, policy.d_floor);
                const double lt = log_term({p, s, n}, fixed.cost);
                c.id.kind = StatisticId::Kind::Thresholded;
                c.id.d = d;
                c.id.p = p;
                c.id.r = (std::sqrt(lt) >
                          policy.k3 * std::sqrt(static_cast<double>(d)))
                             ? policy.k2 * std::sqrt(lt)
                             : policy.k2 *
                                   std::pow(static_cast<double>(d) * lt, 0.25);
            }
            push_unique(c);
        }
    }
    return out;
}

AdaptiveMaxTest make_adaptive_test(const EigenProfile& profile, std::int64_t p,
                                   std::int64_t n,
                                   const CalibrationTable& table, double eta,
                                   const RatePolicy& policy) {
    AdaptiveMaxTest t;
    t.eta = eta;
    t.components = plan_adaptive_components(profile, p, n, policy);
    const double level =
        eta / (2.0 * static_cast<double>(t.components.size()));
    for (AdaptiveComponent& c : t.components)
        c.threshold = table.lookup(c.id, level);
    return t;
}

SmoothnessAdaptiveTest make_smoothness_adaptive_test_analytic(
    double alpha0, double alpha1, std::int64_t p, std::int64_t n,
    double k_mult) {
    const SmoothnessAdaptiveRates r =
        smoothness_adaptive_rates(alpha0, alpha0, alpha1, p, 1, n);
    SmoothnessAdaptiveTest t;
    t.nu_grid = r.test_grid;
    t.k_mult = k_mult;
    t.p = p;
    t.n = n;
    return t;
}

SmoothnessAdaptiveTest make_smoothness_adaptive_test(
    double alpha0, double alpha1, std::int64_t p, std::int64_t n,
    const CalibrationTable& table, double level) {
    SmoothnessAdaptiveTest t =
        make_smoothness_adaptive_test_analytic(alpha0, alpha1, p, n, 0.0);
    t.k_mult = table.lookup(smoothness_pivot_id(alpha0, alpha1, p, n), level);
    return t;
}

}  // namespace sparsedet
