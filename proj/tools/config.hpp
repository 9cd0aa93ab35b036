#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsedet/eigen_profile.hpp"
#include "sparsedet/rates.hpp"

namespace sparsedet::cli {

// ============================================================================
// Experiment configuration: JSON text in, validated struct out, canonical
// serialization back (used for the provenance hash and the round-trip
// property).
// ============================================================================

struct TestConfig {
    // auto | sparse-threshold | dense-chi2 | dense-chi2-analytic |
    // adaptive-max | smoothness-max | smoothness-max-analytic
    std::string kind = "auto";
    double level = 0.05;           // test level (eta for the max tests)
    RatePolicy policy;             // k2, k3, d_floor
    double alpha0 = 0.5;           // smoothness window, smoothness-max only
    double alpha1 = 2.0;
    double k_mult = 1.0;           // smoothness-max-analytic threshold slope
};

struct PriorConfig {
    // spike-fixed | spike-signed | bulk-signed | adaptive-bulk |
    // sobolev-dense | sobolev-sparse
    std::string kind = "spike-signed";
    double c = 0.5;
    double alpha0 = 0.5;  // scan kinds only
    double alpha1 = 2.0;
    double delta = 0.0;
};

struct ExperimentConfig {
    EigenProfile profile = EigenProfile::sobolev(1.0);
    std::vector<std::int64_t> p_grid{256};
    std::vector<std::int64_t> s_grid{4};
    std::vector<std::int64_t> n_grid{4096};
    TestConfig test;
    PriorConfig prior;
    std::vector<double> scales{1.0};
    std::int64_t reps = 1000;
    std::int64_t calibration_reps = 20000;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out_dir = "out";
};

// Throws ConfigError naming the offending field.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical JSON (sorted keys, arrays normalized); parse(serialize(x)) == x.
std::string serialize_config(const ExperimentConfig& config);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace sparsedet::cli
