#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sparsedet/errors.hpp"
#include "sparsedet/priors.hpp"

namespace sparsedet::cli {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
}

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (allowed.count(it.key()) == 0) {
            fail(where.empty() ? it.key() : where + "." + it.key(),
                 "unknown key");
        }
    }
}

double get_number(const json& obj, const std::string& where,
                  const std::string& key, double fallback,
                  bool required = false) {
    if (!obj.contains(key)) {
        if (required) fail(where + key, "missing");
        return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) fail(where + key, "must be a number");
    return v.get<double>();
}

std::int64_t get_integer(const json& obj, const std::string& where,
                         const std::string& key, std::int64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(where + key, "must be an integer");
    return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const std::string& where,
                       const std::string& key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(where + key, "must be a string");
    return v.get<std::string>();
}

std::vector<std::int64_t> get_int_grid(const json& obj, const std::string& key,
                                       std::vector<std::int64_t> fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    std::vector<std::int64_t> out;
    if (v.is_number_integer()) {
        out.push_back(v.get<std::int64_t>());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            if (!e.is_number_integer()) fail(key, "entries must be integers");
            out.push_back(e.get<std::int64_t>());
        }
    } else {
        fail(key, "must be an integer or an array of integers");
    }
    if (out.empty()) fail(key, "must be nonempty");
    for (std::int64_t x : out) {
        if (x < 1) fail(key, "entries must be >= 1");
    }
    return out;
}

std::vector<double> get_scales(const json& obj, std::vector<double> fallback) {
    if (!obj.contains("scales")) return fallback;
    const json& v = obj.at("scales");
    if (!v.is_array()) fail("scales", "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) fail("scales", "entries must be numbers");
        out.push_back(e.get<double>());
    }
    if (out.empty()) fail("scales", "must be nonempty");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out[i] >= 0.0)) fail("scales", "entries must be >= 0");
        if (i > 0 && !(out[i] > out[i - 1])) {
            fail("scales", "must be strictly increasing");
        }
    }
    return out;
}

EigenProfile parse_profile(const json& root) {
    if (!root.contains("profile")) return EigenProfile::sobolev(1.0);
    const json& obj = root.at("profile");
    if (!obj.is_object()) fail("profile", "must be a table");
    check_keys(obj, "profile", {"kind", "alpha", "rank", "c2", "gamma", "values"});
    const std::string kind = get_string(obj, "profile.", "kind", "");
    if (kind.empty()) fail("profile.kind", "missing");
    EigenProfile profile;
    try {
        if (kind == "sobolev") {
            profile = EigenProfile::sobolev(
                get_number(obj, "profile.", "alpha", 0.0, true));
        } else if (kind == "finite-rank") {
            profile = EigenProfile::finite_rank(
                get_integer(obj, "profile.", "rank", 0));
        } else if (kind == "exp-decay") {
            profile = EigenProfile::exp_decay(
                get_number(obj, "profile.", "c2", 0.0, true),
                get_number(obj, "profile.", "gamma", 1.0));
        } else if (kind == "explicit") {
            if (!obj.contains("values") || !obj.at("values").is_array()) {
                fail("profile.values", "must be an array of numbers");
            }
            std::vector<double> values;
            for (const auto& e : obj.at("values")) {
                if (!e.is_number()) fail("profile.values", "entries must be numbers");
                values.push_back(e.get<double>());
            }
            profile = EigenProfile::explicit_seq(std::move(values));
        } else {
            fail("profile.kind",
                 "must be one of sobolev, finite-rank, exp-decay, explicit");
        }
        validate(profile);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail("profile", e.what());
    }
    return profile;
}

json profile_to_json(const EigenProfile& profile) {
    json obj;
    switch (profile.kind) {
        case ProfileKind::Sobolev:
            obj["kind"] = "sobolev";
            obj["alpha"] = profile.alpha;
            break;
        case ProfileKind::FiniteRank:
            obj["kind"] = "finite-rank";
            obj["rank"] = profile.rank;
            break;
        case ProfileKind::ExpDecay:
            obj["kind"] = "exp-decay";
            obj["c2"] = profile.c2;
            obj["gamma"] = profile.gamma;
            break;
        case ProfileKind::Explicit:
            obj["kind"] = "explicit";
            obj["values"] = profile.values;
            break;
    }
    return obj;
}

TestConfig parse_test(const json& root) {
    TestConfig test;
    if (!root.contains("test")) return test;
    const json& obj = root.at("test");
    if (!obj.is_object()) fail("test", "must be a table");
    check_keys(obj, "test",
               {"kind", "level", "k2", "k3", "d_floor", "alpha0", "alpha1",
                "k_mult"});
    test.kind = get_string(obj, "test.", "kind", test.kind);
    static const std::set<std::string> kinds = {
        "auto",          "sparse-threshold",       "dense-chi2",
        "dense-chi2-analytic", "adaptive-max",     "smoothness-max",
        "smoothness-max-analytic"};
    if (kinds.count(test.kind) == 0) fail("test.kind", "unknown test kind");
    test.level = get_number(obj, "test.", "level", test.level);
    if (!(test.level > 0.0 && test.level < 1.0)) {
        fail("test.level", "must lie strictly between 0 and 1");
    }
    test.policy.k2 = get_number(obj, "test.", "k2", test.policy.k2);
    test.policy.k3 = get_number(obj, "test.", "k3", test.policy.k3);
    test.policy.d_floor =
        get_integer(obj, "test.", "d_floor", test.policy.d_floor);
    if (!(test.policy.k2 > 0.0)) fail("test.k2", "must be > 0");
    if (!(test.policy.k3 > 0.0)) fail("test.k3", "must be > 0");
    if (test.policy.d_floor < 1) fail("test.d_floor", "must be >= 1");
    test.alpha0 = get_number(obj, "test.", "alpha0", test.alpha0);
    test.alpha1 = get_number(obj, "test.", "alpha1", test.alpha1);
    if (!(test.alpha0 > 0.0)) fail("test.alpha0", "must be > 0");
    if (!(test.alpha1 >= test.alpha0)) fail("test.alpha1", "must be >= alpha0");
    test.k_mult = get_number(obj, "test.", "k_mult", test.k_mult);
    if (!(test.k_mult > 0.0)) fail("test.k_mult", "must be > 0");
    return test;
}

PriorConfig parse_prior(const json& root) {
    PriorConfig prior;
    if (!root.contains("prior")) return prior;
    const json& obj = root.at("prior");
    if (!obj.is_object()) fail("prior", "must be a table");
    check_keys(obj, "prior", {"kind", "c", "alpha0", "alpha1", "delta"});
    prior.kind = get_string(obj, "prior.", "kind", prior.kind);
    try {
        prior_kind_from_name(prior.kind);
    } catch (const Error& e) {
        fail("prior.kind", e.what());
    }
    prior.c = get_number(obj, "prior.", "c", prior.c);
    if (!(prior.c > 0.0)) fail("prior.c", "must be > 0");
    prior.alpha0 = get_number(obj, "prior.", "alpha0", prior.alpha0);
    prior.alpha1 = get_number(obj, "prior.", "alpha1", prior.alpha1);
    if (!(prior.alpha0 > 0.0)) fail("prior.alpha0", "must be > 0");
    if (!(prior.alpha1 >= prior.alpha0)) fail("prior.alpha1", "must be >= alpha0");
    prior.delta = get_number(obj, "prior.", "delta", prior.delta);
    if (!(prior.delta >= 0.0)) fail("prior.delta", "must be >= 0");
    return prior;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a table");
    check_keys(root, "",
               {"profile", "p", "s", "n", "test", "prior", "scales", "reps",
                "calibration_reps", "seed", "jobs", "out_dir"});

    ExperimentConfig config;
    config.profile = parse_profile(root);
    config.p_grid = get_int_grid(root, "p", config.p_grid);
    config.s_grid = get_int_grid(root, "s", config.s_grid);
    config.n_grid = get_int_grid(root, "n", config.n_grid);
    config.test = parse_test(root);
    config.prior = parse_prior(root);
    config.scales = get_scales(root, config.scales);
    config.reps = get_integer(root, "", "reps", config.reps);
    if (config.reps < 100) fail("reps", "must be >= 100");
    config.calibration_reps =
        get_integer(root, "", "calibration_reps", config.calibration_reps);
    if (config.calibration_reps < 100) fail("calibration_reps", "must be >= 100");
    const std::int64_t seed = get_integer(root, "", "seed",
                                          static_cast<std::int64_t>(config.seed));
    if (seed < 0) fail("seed", "must be >= 0");
    config.seed = static_cast<std::uint64_t>(seed);
    config.jobs = static_cast<int>(get_integer(root, "", "jobs", config.jobs));
    if (config.jobs < 1 || config.jobs > 256) fail("jobs", "must be in [1, 256]");
    config.out_dir = get_string(root, "", "out_dir", config.out_dir);
    if (config.out_dir.empty()) fail("out_dir", "must be nonempty");

    for (std::int64_t p : config.p_grid) {
        for (std::int64_t s : config.s_grid) {
            if (s > p) fail("s", "entries must not exceed the smallest p");
        }
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& config) {
    json root;
    root["profile"] = profile_to_json(config.profile);
    root["p"] = config.p_grid;
    root["s"] = config.s_grid;
    root["n"] = config.n_grid;
    root["test"] = {{"kind", config.test.kind},
                    {"level", config.test.level},
                    {"k2", config.test.policy.k2},
                    {"k3", config.test.policy.k3},
                    {"d_floor", config.test.policy.d_floor},
                    {"alpha0", config.test.alpha0},
                    {"alpha1", config.test.alpha1},
                    {"k_mult", config.test.k_mult}};
    root["prior"] = {{"kind", config.prior.kind},
                     {"c", config.prior.c},
                     {"alpha0", config.prior.alpha0},
                     {"alpha1", config.prior.alpha1},
                     {"delta", config.prior.delta}};
    root["scales"] = config.scales;
    root["reps"] = config.reps;
    root["calibration_reps"] = config.calibration_reps;
    root["seed"] = config.seed;
    root["jobs"] = config.jobs;
    root["out_dir"] = config.out_dir;
    return root.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    const std::string text = serialize_config(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace sparsedet::cli
