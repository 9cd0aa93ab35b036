#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <doctest.h>

#include "sparsedet/errors.hpp"
#include "sparsedet/montecarlo.hpp"

using namespace sparsedet;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("observations are deterministic with separated streams") {
    const CoefficientMatrix null_signal{};
    const Observation a = make_observation(null_signal, 5, 4, 3, 42, 7);
    const Observation b = make_observation(null_signal, 5, 4, 3, 42, 7);
    CHECK(a.x == b.x);

    const Observation other_rep = make_observation(null_signal, 5, 4, 3, 42, 8);
    CHECK(a.x != other_rep.x);
    const Observation other_seed = make_observation(null_signal, 5, 4, 3, 43, 7);
    CHECK(a.x != other_seed.x);
    const Observation other_domain =
        make_observation(null_signal, 5, 4, 3, 42, 7, RngDomain::AltNoise);
    CHECK(a.x != other_domain.x);

    // Entry (k, j) does not depend on the grid size around it.
    const Observation wider = make_observation(null_signal, 5, 4, 6, 42, 7);
    for (std::int64_t k = 1; k <= 3; ++k)
        for (std::int64_t j = 1; j <= 5; ++j)
            CHECK(a.at(k, j) == wider.at(k, j));
}

TEST_CASE("observations have the stated mean and variance") {
    CoefficientMatrix theta;
    theta.rows = 1;
    theta.p = 10000;
    theta.theta.assign(10000, 0.25);
    const std::int64_t n = 4;
    const Observation obs = make_observation(theta, 10000, n, 2, 5, 0);

    double m1 = 0.0, m2 = 0.0;  // signal row
    double z1 = 0.0, z2 = 0.0;  // pure-noise row
    for (std::int64_t j = 1; j <= 10000; ++j) {
        m1 += obs.at(1, j);
        m2 += obs.at(1, j) * obs.at(1, j);
        z1 += obs.at(2, j);
        z2 += obs.at(2, j) * obs.at(2, j);
    }
    m1 /= 10000.0; m2 /= 10000.0; z1 /= 10000.0; z2 /= 10000.0;
    // SE of the mean is 0.5 / 100 = 0.005; allow 5 SEs.
    CHECK(std::fabs(m1 - 0.25) < 0.025);
    CHECK(std::fabs(m2 - (0.0625 + 0.25)) < 0.03);  // mean^2 + 1/n
    CHECK(std::fabs(z1) < 0.025);
    CHECK(std::fabs(z2 - 0.25) < 0.03);
}

TEST_CASE("observation shape violations throw") {
    CoefficientMatrix theta;
    theta.rows = 2;
    theta.p = 3;
    theta.theta.assign(6, 1.0);
    CHECK_THROWS_AS(make_observation(theta, 4, 1, 2, 0, 0),
                    DimensionMismatch);  // width mismatch
    CHECK_THROWS_AS(make_observation(theta, 3, 1, 1, 0, 0),
                    DimensionMismatch);  // signal deeper than the grid
    CHECK_THROWS_AS(make_observation(CoefficientMatrix{}, 0, 1, 1, 0, 0),
                    DimensionMismatch);  // empty grid
}

TEST_CASE("calibration picks the conservative empirical quantile") {
    StatisticId id;
    id.kind = StatisticId::Kind::Thresholded;
    id.d = 3;
    id.r = 1.0;
    id.p = 16;
    McOptions opt;
    opt.reps = 2000;
    opt.seed = 77;

    CalibrationTable table;
    const double level = 0.1;
    const double threshold = calibrate_threshold(id, level, opt, &table);

    // Replay the calibration sample and verify the quantile property on it.
    std::vector<double> vals;
    const CoefficientMatrix null_signal{};
    for (std::int64_t rep = 0; rep < opt.reps; ++rep) {
        const Observation obs = make_observation(
            null_signal, id.p, 1, required_rows(id), opt.seed,
            static_cast<std::uint64_t>(rep));
        vals.push_back(evaluate_statistic(id, obs));
    }
    std::int64_t rejected = 0;
    double runner_up = -kInf;
    for (double v : vals) {
        if (v >= threshold) ++rejected;
        else runner_up = std::max(runner_up, v);
    }
    CHECK(static_cast<double>(rejected) <=
          level * static_cast<double>(opt.reps));
    // The next smaller sampled cut would overshoot the level.
    std::int64_t rejected_at_runner_up = 0;
    for (double v : vals)
        if (v >= runner_up) ++rejected_at_runner_up;
    CHECK(static_cast<double>(rejected_at_runner_up) >
          level * static_cast<double>(opt.reps));

    REQUIRE(table.entries().size() == 1);
    CHECK(table.entries()[0].level == level);
    CHECK(table.entries()[0].threshold == threshold);
    CHECK(table.entries()[0].reps == opt.reps);
    CHECK(table.entries()[0].seed == opt.seed);

    McOptions thin = opt;
    thin.reps = 50;
    CHECK_THROWS_AS(calibrate_threshold(id, 0.1, thin), InsufficientReps);
    CHECK_THROWS_AS(calibrate_threshold(id, 0.0, opt), ConfigError);
    CHECK_THROWS_AS(calibrate_threshold(id, 1.0, opt), ConfigError);
}

TEST_CASE("risk estimates hit the degenerate thresholds exactly") {
    const ProblemDims dims{8, 1, 16};
    CoefficientMatrix theta;
    theta.rows = 1;
    theta.p = 8;
    theta.theta.assign(8, 0.0);
    theta.theta[0] = 1.0;
    McOptions opt;
    opt.reps = 100;
    opt.seed = 3;

    const RiskEstimate never =
        estimate_risk(SparseThresholdTest{2, 1.0, kInf}, Alternative{theta},
                      dims, opt);
    CHECK(never.type1 == 0.0);
    CHECK(never.type2 == 1.0);
    CHECK(never.total == 1.0);

    const RiskEstimate always =
        estimate_risk(SparseThresholdTest{2, 1.0, -kInf}, Alternative{theta},
                      dims, opt);
    CHECK(always.type1 == 1.0);
    CHECK(always.type2 == 0.0);
    CHECK(always.truncation_bias == 0.0);  // fixed alternatives are exact
}

TEST_CASE("risk estimation is schedule independent") {
    const ProblemDims dims{8, 2, 64};
    PriorSpec prior;
    prior.kind = PriorKind::SpikeSigned;
    prior.c = 0.8;
    prior.profile = EigenProfile::sobolev(1.0);
    prior.dims = dims;
    const TestSpec spec = SparseThresholdTest{8, 1.5, 20.0};

    McOptions serial;
    serial.reps = 300;
    serial.seed = 11;
    serial.jobs = 1;
    McOptions parallel = serial;
    parallel.jobs = 4;

    const RiskEstimate a = estimate_risk(spec, Alternative{prior}, dims, serial);
    const RiskEstimate b =
        estimate_risk(spec, Alternative{prior}, dims, parallel);
    CHECK(a.type1 == b.type1);
    CHECK(a.type2 == b.type2);
    CHECK(a.total == b.total);

    // The prior's mass past the simulated rows is reported as bias.
    CHECK(a.truncation_bias ==
          doctest::Approx(2.0 * eigenvalue(prior.profile, 65)));
    McOptions deep = serial;
    deep.k_max = 70;
    const RiskEstimate c = estimate_risk(spec, Alternative{prior}, dims, deep);
    CHECK(c.truncation_bias ==
          doctest::Approx(2.0 * eigenvalue(prior.profile, 71)));
}

TEST_CASE("risk estimation validates shapes and depth") {
    const ProblemDims dims{8, 1, 16};
    McOptions opt;
    opt.reps = 10;
    CoefficientMatrix wrong;
    wrong.rows = 1;
    wrong.p = 9;
    wrong.theta.assign(9, 0.1);
    CHECK_THROWS_AS(estimate_risk(SparseThresholdTest{1, 1.0, 5.0},
                                  Alternative{wrong}, dims, opt),
                    DimensionMismatch);

    PriorSpec prior;
    prior.kind = PriorKind::SpikeFixed;
    prior.c = 0.5;
    prior.profile = EigenProfile::sobolev(1.0);
    prior.dims = {9, 1, 16};
    CHECK_THROWS_AS(estimate_risk(SparseThresholdTest{1, 1.0, 5.0},
                                  Alternative{prior}, dims, opt),
                    DimensionMismatch);

    McOptions shallow = opt;
    shallow.k_max = 4;
    CHECK_THROWS_AS(estimate_risk(SparseThresholdTest{8, 1.0, 5.0},
                                  Alternative{CoefficientMatrix{}}, dims,
                                  shallow),
                    DimensionMismatch);
    CHECK_THROWS_AS(estimate_risk(SparseThresholdTest{1, 1.0, 5.0},
                                  Alternative{CoefficientMatrix{}}, dims,
                                  McOptions{0, 0, 1, 0}),
                    ConfigError);
}

TEST_CASE("a well-separated signal is detected with low risk") {
    const ProblemDims dims{8, 8, 100};
    CoefficientMatrix theta;
    theta.rows = 1;
    theta.p = 8;
    theta.theta.assign(8, 0.0);
    theta.theta[0] = 0.9;  // noncentrality n c^2 = 81 against chi2_8
    McOptions opt;
    opt.reps = 400;
    opt.seed = 21;
    opt.k_max = 2;
    const EigenProfile profile = EigenProfile::finite_rank(1);
    const DenseChi2Test test = make_dense_test_analytic(profile, dims, 0.05);
    REQUIRE(test.nu == 2);
    const RiskEstimate risk =
        estimate_risk(TestSpec{test}, Alternative{theta}, dims, opt);
    CHECK(risk.type1 <= 0.05);  // Chebyshev-calibrated, conservative
    CHECK(risk.type2 <= 0.05);
    CHECK(risk.ci_half_width > 0.0);
    CHECK(risk.ci_half_width < 0.1);
}

TEST_CASE("wilson intervals behave at the edges") {
    const WilsonInterval zero = wilson_interval(0, 100);
    CHECK(zero.lo <= 1e-12);  // clamped at zero up to floating-point residue
    CHECK(zero.hi > 0.0);
    CHECK(zero.hi < 0.06);
    const WilsonInterval full = wilson_interval(100, 100);
    CHECK(full.hi == 1.0);
    CHECK(full.lo > 0.94);
    const WilsonInterval mid = wilson_interval(50, 100);
    CHECK(mid.lo < 0.5);
    CHECK(mid.hi > 0.5);
    const WilsonInterval tight = wilson_interval(5000, 10000);
    CHECK(tight.hi - tight.lo < mid.hi - mid.lo);
}

TEST_CASE("power curves scale the prior to rate multiples") {
    const EigenProfile profile = EigenProfile::sobolev(1.0);
    const ProblemDims dims{16, 2, 64};
    const DenseChi2Test test = make_dense_test_analytic(profile, dims, 0.1);
    McOptions opt;
    opt.reps = 200;
    opt.seed = 31;

    const std::vector<double> scales{0.0, 1.0, 3.0};
    const auto curve = power_curve(TestSpec{test}, PriorKind::SpikeSigned,
                                   profile, dims, scales, opt);
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].scale == 0.0);
    CHECK(curve[0].amplitude == 0.0);
    // At radius zero the alternative is the null: nearly always accepted by
    // the conservative analytic threshold.
    CHECK(curve[0].risk.type2 > 0.9);

    PriorSpec proto;
    proto.kind = PriorKind::SpikeSigned;
    proto.profile = profile;
    proto.dims = dims;
    const double eps_sq = separation_rate(profile, dims).eps_sq;
    for (const auto& point : curve) {
        const double norm =
            point.amplitude * point.amplitude * unit_norm_sq(proto);
        CHECK(norm ==
              doctest::Approx(point.scale * point.scale * eps_sq).epsilon(1e-12));
    }

    CHECK_THROWS_AS(power_curve(TestSpec{test}, PriorKind::SpikeSigned, profile,
                                dims, {}, opt),
                    ConfigError);
    CHECK_THROWS_AS(power_curve(TestSpec{test}, PriorKind::SpikeSigned, profile,
                                dims, {-1.0, 1.0}, opt),
                    ConfigError);
    CHECK_THROWS_AS(power_curve(TestSpec{test}, PriorKind::SpikeSigned, profile,
                                dims, {1.0, 1.0}, opt),
                    ConfigError);
}
