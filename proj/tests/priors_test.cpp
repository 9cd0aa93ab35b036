#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include <doctest.h>

#include "sparsedet/errors.hpp"
#include "sparsedet/priors.hpp"
#include "sparsedet/rates.hpp"
#include "sparsedet/rng.hpp"

using namespace sparsedet;

namespace {

std::int64_t support_size(const CoefficientMatrix& theta) {
    std::int64_t active = 0;
    for (std::int64_t j = 1; j <= theta.p; ++j)
        for (std::int64_t k = 1; k <= theta.rows; ++k)
            if (theta.at(k, j) != 0.0) {
                ++active;
                break;
            }
    return active;
}

}  // namespace

TEST_CASE("prior names round-trip") {
    for (PriorKind k :
         {PriorKind::SpikeFixed, PriorKind::SpikeSigned, PriorKind::BulkSigned,
          PriorKind::AdaptiveBulk, PriorKind::SobolevDense,
          PriorKind::SobolevSparse}) {
        CHECK(prior_kind_from_name(prior_name(k)) == k);
    }
    CHECK_THROWS_AS(prior_kind_from_name("bogus"), ConfigError);
}

TEST_CASE("fixed spike draws have exact norm and stay in class") {
    PriorSpec spec;
    spec.kind = PriorKind::SpikeFixed;
    spec.c = 0.75;
    spec.profile = EigenProfile::sobolev(1.0);
    spec.dims = {64, 5, 256};

    // Row 1 has eigenvalue 1, so the cap is exactly 1 regardless of profile.
    CHECK(admissible_amplitude(spec) == doctest::Approx(1.0));
    CHECK(unit_norm_sq(spec) == doctest::Approx(5.0));
    CHECK(prior_max_rows(spec) == 1);

    std::set<std::vector<std::int64_t>> supports;
    for (std::uint64_t rep = 0; rep < 2000; ++rep) {
        SubStream rng(7, rep, RngDomain::Prior);
        const CoefficientMatrix theta = sample_prior(spec, rng);
        REQUIRE(theta.rows == 1);
        REQUIRE(theta.p == 64);
        CHECK(theta.squared_norm() ==
              doctest::Approx(0.75 * 0.75 * 5.0).epsilon(1e-12));
        CHECK(support_size(theta) == 5);
        CHECK(draw_in_class(spec, theta));
        std::vector<std::int64_t> sup;
        for (std::int64_t j = 1; j <= theta.p; ++j) {
            const double v = theta.at(1, j);
            if (v != 0.0) {
                CHECK(v == doctest::Approx(0.75));  // fixed sign
                sup.push_back(j);
            }
        }
        supports.insert(sup);
    }
    CHECK(supports.size() > 100);  // the support really is random
}

TEST_CASE("signed spike scales with the sparse-tail radius") {
    PriorSpec spec;
    spec.kind = PriorKind::SpikeSigned;
    spec.c = 0.6;
    spec.profile = EigenProfile::sobolev(1.0);
    spec.dims = {128, 2, 512};
    const double L = log_term(spec.dims);
    const double n = 512.0;

    CHECK(unit_norm_sq(spec) == doctest::Approx(2.0 * L / n));
    CHECK(admissible_amplitude(spec) == doctest::Approx(std::sqrt(n / L)));

    bool saw_plus = false, saw_minus = false;
    for (std::uint64_t rep = 0; rep < 2000; ++rep) {
        SubStream rng(11, rep, RngDomain::Prior);
        const CoefficientMatrix theta = sample_prior(spec, rng);
        CHECK(theta.squared_norm() ==
              doctest::Approx(0.36 * 2.0 * L / n).epsilon(1e-12));
        CHECK(draw_in_class(spec, theta));
        for (std::int64_t j = 1; j <= theta.p; ++j) {
            const double v = theta.at(1, j);
            if (v > 0.0) saw_plus = true;
            if (v < 0.0) saw_minus = true;
        }
    }
    CHECK(saw_plus);
    CHECK(saw_minus);
}

TEST_CASE("bulk prior spreads the envelope over the truncation rows") {
    PriorSpec spec;
    spec.kind = PriorKind::BulkSigned;
    spec.c = 0.7;
    spec.profile = EigenProfile::sobolev(1.0);
    spec.dims = {100, 1, 1000};
    const std::int64_t nu = truncation_order(spec.profile, spec.dims);
    REQUIRE(nu >= 2);
    const double gamma = rate_envelope(spec.profile, spec.dims);
    const double unit = static_cast<double>(nu - 1) * gamma /
                        static_cast<double>(nu);
    CHECK(unit_norm_sq(spec) == doctest::Approx(unit));
    // Spreading over nu - 1 rows keeps at least half the envelope.
    CHECK(unit >= 0.5 * gamma);

    for (std::uint64_t rep = 0; rep < 1000; ++rep) {
        SubStream rng(13, rep, RngDomain::Prior);
        const CoefficientMatrix theta = sample_prior(spec, rng);
        REQUIRE(theta.rows == nu - 1);
        CHECK(theta.squared_norm() ==
              doctest::Approx(0.49 * unit).epsilon(1e-12));
        CHECK(draw_in_class(spec, theta));
    }
    CHECK(prior_max_rows(spec) == nu - 1);

    // Truncation order 1 leaves no bulk rows to fill.
    PriorSpec degenerate = spec;
    degenerate.dims = {8, 1, 1};
    REQUIRE(truncation_order(degenerate.profile, degenerate.dims) == 1);
    CHECK_THROWS_AS(unit_norm_sq(degenerate), InfeasibleSpec);
}

TEST_CASE("amplitudes above the ellipsoid cap are rejected") {
    PriorSpec spec;
    spec.kind = PriorKind::BulkSigned;
    spec.profile = EigenProfile::sobolev(1.0);
    spec.dims = {100, 1, 1000};
    const double cap = admissible_amplitude(spec);
    REQUIRE(cap > 0.0);

    spec.c = 0.999 * cap;
    SubStream ok(17, 0, RngDomain::Prior);
    CHECK_NOTHROW(sample_prior(spec, ok));

    spec.c = 1.01 * cap;
    SubStream bad(17, 1, RngDomain::Prior);
    CHECK_THROWS_AS(sample_prior(spec, bad), InfeasibleSpec);
    CHECK_THROWS_AS(mixture_chi2_divergence_exact(spec), InfeasibleSpec);
}

TEST_CASE("amplitude_for_norm inverts the unit norm") {
    PriorSpec spec;
    spec.kind = PriorKind::SpikeSigned;
    spec.profile = EigenProfile::sobolev(1.0);
    spec.dims = {128, 2, 512};
    const double c = amplitude_for_norm(spec, 0.03);
    CHECK(c * c * unit_norm_sq(spec) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK_THROWS_AS(amplitude_for_norm(spec, -1.0), ConfigError);

    PriorSpec adaptive = spec;
    adaptive.kind = PriorKind::AdaptiveBulk;
    CHECK_THROWS_AS(unit_norm_sq(adaptive), ConfigError);
    PriorSpec scan = spec;
    scan.kind = PriorKind::SobolevDense;
    scan.alpha0 = 0.5;
    scan.alpha1 = 2.0;
    CHECK_THROWS_AS(unit_norm_sq(scan), ConfigError);
}

TEST_CASE("sparsity-adaptive prior draws inside the scanned range") {
    PriorSpec spec;
    spec.kind = PriorKind::AdaptiveBulk;
    spec.c = 1.5;
    spec.profile = EigenProfile::finite_rank(32);
    spec.dims = {512, 512, 8192};

    const double cost =
        adaptation_fixed_point(spec.profile, 512, 8192).cost;
    const double floor = std::sqrt(512.0 * cost);
    const double cap = admissible_amplitude(spec);
    REQUIRE(spec.c < cap);

    std::set<std::int64_t> seen_rows;
    for (std::uint64_t rep = 0; rep < 500; ++rep) {
        SubStream rng(19, rep, RngDomain::Prior);
        const CoefficientMatrix theta = sample_prior(spec, rng);
        CHECK(static_cast<double>(support_size(theta)) >=
              floor * (1.0 - 1e-12));
        CHECK(draw_in_class(spec, theta));
        seen_rows.insert(theta.rows);
    }
    CHECK(!seen_rows.empty());
    for (std::int64_t rows : seen_rows)
        CHECK(rows <= prior_max_rows(spec));
}

TEST_CASE("smoothness-scan priors draw dyadic truncations in class") {
    PriorSpec dense;
    dense.kind = PriorKind::SobolevDense;
    dense.dims = {64, 8, 8192};
    dense.alpha0 = 0.5;
    dense.alpha1 = 2.0;
    dense.c = 0.5 * admissible_amplitude(dense);

    PriorSpec sparse = dense;
    sparse.kind = PriorKind::SobolevSparse;
    sparse.dims = {4096, 2, 4096};
    sparse.c = 0.5 * admissible_amplitude(sparse);

    for (const PriorSpec& spec : {dense, sparse}) {
        std::set<std::int64_t> seen_rows;
        for (std::uint64_t rep = 0; rep < 600; ++rep) {
            SubStream rng(23, rep, RngDomain::Prior);
            const CoefficientMatrix theta = sample_prior(spec, rng);
            CHECK(draw_in_class(spec, theta));
            CHECK(support_size(theta) == spec.dims.s);
            // Truncations are dyadic.
            CHECK((theta.rows & (theta.rows - 1)) == 0);
            seen_rows.insert(theta.rows);
        }
        CHECK(seen_rows.size() >= 2);  // the truncation really is drawn
        for (std::int64_t rows : seen_rows)
            CHECK(rows <= prior_max_rows(spec));
    }

    // A calibration ratio at or below 1 leaves nothing to scan.
    PriorSpec infeasible = dense;
    infeasible.dims = {64, 1, 1};
    SubStream rng(29, 0, RngDomain::Prior);
    CHECK_THROWS_AS(sample_prior(infeasible, rng), InfeasibleSpec);

    PriorSpec bad_window = dense;
    bad_window.alpha0 = 2.0;
    bad_window.alpha1 = 0.5;
    CHECK_THROWS_AS(sample_prior(bad_window, rng), InfeasibleSpec);
}

TEST_CASE("membership checker flags violations") {
    const EigenProfile profile = EigenProfile::sobolev(1.0);
    CoefficientMatrix theta;
    theta.rows = 2;
    theta.p = 4;
    theta.theta = {0.5, 0.0, 0.0, 0.0,
                   0.5, 0.0, 0.0, 0.0};
    // Column 1: 0.25 / 1 + 0.25 / 2^-2 = 1.25 > 1.
    CHECK_FALSE(in_parameter_space(theta, profile, {4, 1, 16}));
    theta.theta[4] = 0.25;  // 0.25 + 0.0625 * 4 = 0.5 <= 1
    CHECK(in_parameter_space(theta, profile, {4, 1, 16}));
    // Sparsity bound: two active columns against s = 1.
    theta.theta[1] = 0.1;
    CHECK_FALSE(in_parameter_space(theta, profile, {4, 1, 16}));
    CHECK(in_parameter_space(theta, profile, {4, 2, 16}));
    // Wrong width never belongs.
    CHECK_FALSE(in_parameter_space(theta, profile, {5, 2, 16}));
}
