#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "sparsedet/errors.hpp"
#include "sparsedet/rates.hpp"
#include "sparsedet/special_functions.hpp"
#include "sparsedet/statistics.hpp"

using namespace sparsedet;

namespace {

Observation small_observation() {
    // 3 x 2 grid at n = 4, entries chosen to exercise both sides of the
    // thresholding cut.
    Observation obs;
    obs.k_max = 3;
    obs.p = 2;
    obs.n = 4;
    obs.x = {0.5, -1.0,   // row 1
             1.5, 0.25,   // row 2
             -0.5, 2.0};  // row 3
    return obs;
}

}  // namespace

TEST_CASE("coordinate energies accumulate scaled squares") {
    const Observation obs = small_observation();
    const auto e1 = coordinate_energies(obs, 1);
    CHECK(e1[0] == doctest::Approx(4.0 * 0.25));
    CHECK(e1[1] == doctest::Approx(4.0 * 1.0));
    const auto e3 = coordinate_energies(obs, 3);
    CHECK(e3[0] == doctest::Approx(4.0 * (0.25 + 2.25 + 0.25)));
    CHECK(e3[1] == doctest::Approx(4.0 * (1.0 + 0.0625 + 4.0)));
    CHECK_THROWS_AS(coordinate_energies(obs, 4), DimensionMismatch);
}

TEST_CASE("thresholded statistic matches an independent evaluation") {
    const Observation obs = small_observation();
    for (std::int64_t d : {1, 2, 3}) {
        for (double r : {0.0, 0.7, 1.5}) {
            const auto energies = coordinate_energies(obs, d);
            const double cutoff = static_cast<double>(d) + r * r;
            const double centre = conditional_null_mean(d, r);
            double expect = 0.0;
            for (double e : energies) {
                if (e >= cutoff) expect += e - centre;
            }
            CHECK(thresholded_statistic(obs, d, r) ==
                  doctest::Approx(expect).epsilon(1e-13));
        }
    }
}

TEST_CASE("dense statistic is the total energy") {
    const Observation obs = small_observation();
    CHECK(dense_statistic(obs, 2) ==
          doctest::Approx(4.0 * (0.25 + 1.0 + 2.25 + 0.0625)));
    CHECK_THROWS_AS(dense_statistic(obs, 5), DimensionMismatch);
}

TEST_CASE("statistic identities key on every parameter") {
    StatisticId a;
    a.kind = StatisticId::Kind::Thresholded;
    a.d = 8;
    a.r = 1.5;
    a.p = 64;
    StatisticId b = a;
    CHECK(a.canonical() == b.canonical());
    b.r = 1.5000000001;
    CHECK(a.canonical() != b.canonical());
    b = a;
    b.p = 65;
    CHECK(a.canonical() != b.canonical());

    StatisticId d;
    d.kind = StatisticId::Kind::Dense;
    d.nu = 8;
    d.p = 64;
    CHECK(a.canonical() != d.canonical());

    CHECK(required_rows(a) == 8);
    CHECK(required_rows(d) == 8);
}

TEST_CASE("identity evaluation equals the direct statistics") {
    const Observation obs = small_observation();
    StatisticId thr;
    thr.kind = StatisticId::Kind::Thresholded;
    thr.d = 2;
    thr.r = 0.7;
    thr.p = 2;
    CHECK(evaluate_statistic(thr, obs) ==
          thresholded_statistic(obs, 2, 0.7));

    StatisticId dense;
    dense.kind = StatisticId::Kind::Dense;
    dense.nu = 3;
    dense.p = 2;
    CHECK(evaluate_statistic(dense, obs) == dense_statistic(obs, 3));

    StatisticId smax;
    smax.kind = StatisticId::Kind::SmoothnessMax;
    smax.nu = 2;
    smax.p = 2;
    smax.n = 4;
    const double ll = loglog_floored(4.0 * 2.0);
    double best = -std::numeric_limits<double>::infinity();
    for (std::int64_t nu = 1; nu <= 2; nu *= 2) {
        const double np = static_cast<double>(nu) * 2.0;
        best = std::max(best, (dense_statistic(obs, nu) - np) /
                                  (std::sqrt(np * ll) + ll));
    }
    CHECK(evaluate_statistic(smax, obs) == doctest::Approx(best));
}

TEST_CASE("calibration table stores thresholds by identity and level") {
    CalibrationTable table;
    StatisticId id;
    id.kind = StatisticId::Kind::Dense;
    id.nu = 4;
    id.p = 10;

    CHECK_FALSE(table.contains(id, 0.1));
    CHECK_THROWS_AS(table.lookup(id, 0.1), MissingCalibration);

    CalibrationEntry e;
    e.id = id;
    e.level = 0.1;
    e.threshold = 52.0;
    e.reps = 1000;
    e.seed = 9;
    table.insert(e);
    CHECK(table.contains(id, 0.1));
    CHECK(table.lookup(id, 0.1) == 52.0);
    CHECK_FALSE(table.contains(id, 0.05));

    // A second level for the same statistic must respect monotonicity.
    e.level = 0.05;
    e.threshold = 55.0;
    CHECK_NOTHROW(table.insert(e));
    e.level = 0.01;
    e.threshold = 40.0;  // smaller level cannot have a smaller threshold
    CHECK_THROWS_AS(table.insert(e), Error);

    // Re-inserting an existing (id, level) replaces the entry.
    e.level = 0.1;
    e.threshold = 51.0;
    table.insert(e);
    CHECK(table.lookup(id, 0.1) == 51.0);
    CHECK(table.entries().size() == 2);
}

TEST_CASE("calibration table round-trips through its file format") {
    CalibrationTable table;
    CalibrationEntry e;
    e.id.kind = StatisticId::Kind::Thresholded;
    e.id.d = 8;
    e.id.r = 2.8840960936742159;
    e.id.p = 4096;
    e.level = 0.05;
    e.threshold = 55.579573863576734;
    e.reps = 50000;
    e.seed = 1234567890123456789ull;
    table.insert(e);
    CalibrationEntry s;
    s.id.kind = StatisticId::Kind::SmoothnessMax;
    s.id.nu = 256;
    s.id.p = 64;
    s.id.n = 512;
    s.level = 0.5;
    s.threshold = -0.25;
    s.reps = 100;
    s.seed = 3;
    table.insert(s);

    const std::string path =
        (std::filesystem::temp_directory_path() / "caltable-test.csv").string();
    table.save(path);
    const CalibrationTable back = CalibrationTable::load(path);
    std::filesystem::remove(path);

    REQUIRE(back.entries().size() == 2);
    CHECK(back.lookup(e.id, 0.05) == e.threshold);
    CHECK(back.lookup(s.id, 0.5) == s.threshold);
    CHECK(back.entries()[0].reps == 50000);
    CHECK(back.entries()[0].seed == e.seed);

    // Absent files load as empty tables (cold cache).
    const CalibrationTable empty = CalibrationTable::load("/nonexistent/x.csv");
    CHECK(empty.entries().empty());
}

TEST_CASE("decisions reject at and above the threshold") {
    const Observation obs = small_observation();
    const double t = thresholded_statistic(obs, 2, 0.7);
    CHECK(decide(SparseThresholdTest{2, 0.7, t}, obs) == 1);  // tie rejects
    CHECK(decide(SparseThresholdTest{2, 0.7, std::nextafter(t, 1e300)}, obs) ==
          0);
    const double dn = dense_statistic(obs, 2);
    CHECK(decide(DenseChi2Test{2, dn}, obs) == 1);
    CHECK(decide(DenseChi2Test{2, std::nextafter(dn, 1e300)}, obs) == 0);

    // Too-shallow or wrong-width observations are rejected loudly.
    CHECK_THROWS_AS(decide(SparseThresholdTest{5, 0.0, 0.0}, obs),
                    DimensionMismatch);
    StatisticId narrow;
    narrow.kind = StatisticId::Kind::Dense;
    narrow.nu = 1;
    narrow.p = 3;  // observation is 2 wide
    CHECK_THROWS_AS(evaluate_statistic(narrow, obs), DimensionMismatch);
    SmoothnessAdaptiveTest smax;
    smax.nu_grid = {1, 2, 4};  // needs 4 rows, observation has 3
    smax.k_mult = 1.0;
    smax.p = 2;
    smax.n = 4;
    CHECK_THROWS_AS(decide(TestSpec{smax}, obs), DimensionMismatch);
}

TEST_CASE("adaptive max rejects when any component fires") {
    const Observation obs = small_observation();
    AdaptiveComponent quiet;
    quiet.id.kind = StatisticId::Kind::Dense;
    quiet.id.nu = 2;
    quiet.id.p = 2;
    quiet.threshold = dense_statistic(obs, 2) + 1.0;
    AdaptiveComponent loud = quiet;
    loud.threshold = dense_statistic(obs, 2) - 1.0;

    AdaptiveMaxTest none;
    none.components = {quiet};
    CHECK(decide(none, obs) == 0);
    AdaptiveMaxTest some;
    some.components = {quiet, loud};
    CHECK(decide(some, obs) == 1);
    CHECK(required_rows(TestSpec{some}) == 2);
}

TEST_CASE("sparse test builder wires the calibrated threshold") {
    const EigenProfile profile = EigenProfile::sobolev(1.0);
    const ProblemDims dims{256, 4, 4096};
    const StatisticId id =
        sparse_test_id(profile, dims, Regime::SparseBulk);
    CHECK(id.kind == StatisticId::Kind::Thresholded);
    CHECK(id.d == std::max(truncation_order(profile, dims), std::int64_t{8}));
    const double lt = log_term(dims);
    CHECK(id.r ==
          doctest::Approx(std::pow(static_cast<double>(id.d) * lt, 0.25)));

    CalibrationTable table;
    CalibrationEntry e;
    e.id = id;
    e.level = 0.05;
    e.threshold = 38.5;
    table.insert(e);
    const SparseThresholdTest t =
        make_sparse_test(profile, dims, Regime::SparseBulk, table, 0.05);
    CHECK(t.d == id.d);
    CHECK(t.r == id.r);
    CHECK(t.threshold == 38.5);

    // Tail offset swaps the fourth root for the square root.
    const StatisticId tail =
        sparse_test_id(profile, dims, Regime::SparseTail);
    CHECK(tail.r == doctest::Approx(std::sqrt(lt)));

    CHECK_THROWS_AS(sparse_test_id(profile, dims, Regime::Dense),
                    InvalidProfile);
    CHECK_THROWS_AS(
        make_sparse_test(profile, dims, Regime::SparseBulk, CalibrationTable{},
                         0.05),
        MissingCalibration);
}

TEST_CASE("dense test builders") {
    const EigenProfile profile = EigenProfile::sobolev(1.0);
    const ProblemDims dims{256, 32, 2048};
    const StatisticId id = dense_test_id(profile, dims);
    CHECK(id.kind == StatisticId::Kind::Dense);
    CHECK(id.nu == truncation_order(profile, dims));

    const DenseChi2Test analytic = make_dense_test_analytic(profile, dims, 0.1);
    const double pnu =
        static_cast<double>(dims.p) * static_cast<double>(id.nu);
    CHECK(analytic.nu == id.nu);
    CHECK(analytic.threshold ==
          doctest::Approx(pnu + (2.0 / std::sqrt(0.1)) * std::sqrt(pnu)));
    CHECK_THROWS_AS(make_dense_test_analytic(profile, dims, 0.0),
                    InvalidProfile);

    CalibrationTable table;
    CalibrationEntry e;
    e.id = id;
    e.level = 0.1;
    e.threshold = pnu + 40.0;
    table.insert(e);
    CHECK(make_dense_test(profile, dims, table, 0.1).threshold == pnu + 40.0);
}

TEST_CASE("adaptive component plan covers the scan grids") {
    const EigenProfile profile = EigenProfile::finite_rank(32);
    const std::int64_t p = 512, n = 8192;
    const auto comps = plan_adaptive_components(profile, p, n);
    REQUIRE(!comps.empty());

    const AdaptationResult fixed = adaptation_fixed_point(profile, p, n);
    const double floor = std::sqrt(static_cast<double>(p) * fixed.cost);
    std::size_t dense_count = 0;
    std::set<std::string> keys;
    for (const auto& c : comps) {
        CHECK(keys.insert(c.id.canonical()).second);  // distinct statistics
        if (static_cast<double>(c.s) >= floor) {
            CHECK(c.id.kind == StatisticId::Kind::Dense);
            ++dense_count;
        } else {
            CHECK(c.id.kind == StatisticId::Kind::Thresholded);
            CHECK(c.id.d >= 8);
        }
    }
    CHECK(dense_count >= 1);

    // Builder splits the budget evenly over twice the component count.
    CalibrationTable table;
    const double level = 0.1 / (2.0 * static_cast<double>(comps.size()));
    for (const auto& c : comps) {
        CalibrationEntry e;
        e.id = c.id;
        e.level = level;
        e.threshold = 1e6;
        table.insert(e);
    }
    const AdaptiveMaxTest t = make_adaptive_test(profile, p, n, table, 0.1);
    CHECK(t.components.size() == comps.size());
    for (const auto& c : t.components) CHECK(c.threshold == 1e6);
    CHECK_THROWS_AS(
        make_adaptive_test(profile, p, n, CalibrationTable{}, 0.1),
        MissingCalibration);
}

TEST_CASE("smoothness-adaptive test builders") {
    const double a0 = 0.5, a1 = 2.0;
    const std::int64_t p = 64, n = 512;
    const SmoothnessAdaptiveTest t =
        make_smoothness_adaptive_test_analytic(a0, a1, p, n, 3.5);
    CHECK(t.k_mult == 3.5);
    CHECK(t.p == p);
    CHECK(t.n == n);
    CHECK(t.nu_grid ==
          smoothness_adaptive_rates(a0, a0, a1, p, 1, n).test_grid);

    const StatisticId pivot = smoothness_pivot_id(a0, a1, p, n);
    CHECK(pivot.kind == StatisticId::Kind::SmoothnessMax);
    CHECK(pivot.nu == t.nu_grid.back());
    CHECK(pivot.p == p);
    CHECK(pivot.n == n);

    CalibrationTable table;
    CalibrationEntry e;
    e.id = pivot;
    e.level = 0.05;
    e.threshold = 2.75;
    table.insert(e);
    const SmoothnessAdaptiveTest calibrated =
        make_smoothness_adaptive_test(a0, a1, p, n, table, 0.05);
    CHECK(calibrated.k_mult == 2.75);
    CHECK(calibrated.nu_grid == t.nu_grid);
}
