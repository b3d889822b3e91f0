#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "banditaudit/io/csv.hpp"
#include "banditaudit/study.hpp"
#include "banditaudit/synth.hpp"

namespace banditaudit::io {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace config_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw data_error("config: " + (path.empty() ? what : path + ": " + what));
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void expect_keys(const json& j, const std::string& path,
                        std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) known = true;
        if (!known) fail(join(path, it.key()), "unknown key");
    }
}

inline double get_double(const json& j, const std::string& path, const char* key,
                         double dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number()) fail(join(path, key), "expected a number");
    return v.get<double>();
}

inline int get_int(const json& j, const std::string& path, const char* key, int dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
    return v.get<int>();
}

inline std::uint64_t get_u64(const json& j, const std::string& path, const char* key,
                             std::uint64_t dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(join(path, key), "expected a non-negative integer");
    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        fail(join(path, key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline bool get_bool(const json& j, const std::string& path, const char* key,
                     bool dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(join(path, key), "expected true or false");
    return v.get<bool>();
}

inline std::string get_string(const json& j, const std::string& path, const char* key,
                              const std::string& dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_string()) fail(join(path, key), "expected a string");
    return v.get<std::string>();
}

inline std::vector<double> get_double_array(const json& j, const std::string& path,
                                            const char* key,
                                            const std::vector<double>& dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_array()) fail(join(path, key), "expected an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
        if (!e.is_number()) fail(join(path, key), "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline Vec get_fixed_vec(const json& j, const std::string& path, const char* key,
                         int n, const Vec& dflt) {
    if (!j.contains(key)) return dflt;
    const std::vector<double> raw = get_double_array(j, path, key, {});
    if (static_cast<int>(raw.size()) != n)
        fail(join(path, key), "expected exactly " + std::to_string(n) + " numbers");
    Vec out(n);
    for (int i = 0; i < n; ++i) out[i] = raw[static_cast<size_t>(i)];
    return out;
}

inline json vec_to_json(const Vec& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

}  // namespace config_detail

// Everything one command run needs, with every field defaulted so an absent
// config file means "all defaults".  The normalized `echo()` of the
// effective settings is what gets hashed and embedded in every output file.
// `workers` is deliberately left out of the echo: scheduling must never
// change output bytes, so it cannot participate in the config hash.
struct RunConfig {
    std::uint64_t master_seed = 0;
    int workers = 1;
    int resamples = 500;
    bool emit_resample_scores = false;
    GroundTruthKind ground_truth_kind = GroundTruthKind::null_advantage;
    FVar ground_truth_feature = FVar::variation;
    ScoreConfig score;
    std::vector<double> delta_grid;
    std::vector<double> gamma_grid;
    AlgorithmConfig algorithm;
    Standardize standardize;
    SynthSpec synth;
    bool synth_seed_given = false;  // absent seed follows master_seed
    int planted_null = 0;           // both 0 => plain synthetic trial
    int planted_effect = 0;
    double planted_effect_size = 0.0;
    std::optional<FVar> planted_feature;  // absent => advantage intercept

    std::uint64_t effective_synth_seed() const {
        return synth_seed_given ? synth.seed : master_seed;
    }

    std::string ground_truth_name() const {
        if (ground_truth_kind == GroundTruthKind::null_advantage)
            return "null-advantage";
        return std::string("null-feature:") + fvar_name(ground_truth_feature);
    }

    std::string score_kind_name() const {
        if (score.kind == ScoreKind::type1) return "type1";
        return std::string("type2:") + fvar_name(score.feature);
    }

    StudyConfig study_config() const {
        StudyConfig sc;
        sc.ground_truth_kind = ground_truth_kind;
        sc.ground_truth_feature = ground_truth_feature;
        sc.B = resamples;
        sc.master_seed = master_seed;
        sc.score = score;
        sc.delta_grid = delta_grid;
        sc.gamma_grid = gamma_grid;
        sc.worker_count = workers;
        sc.algorithm = algorithm;
        return sc;
    }

    nlohmann::json echo() const {
        using nlohmann::json;
        using config_detail::vec_to_json;
        json prior;
        prior["mu_alpha"] = vec_to_json(algorithm.prior.mu0.head(kDimG));
        prior["mu_beta"] = vec_to_json(algorithm.prior.mu0.segment(kDimG, kDimF));
        prior["var_alpha"] =
            vec_to_json(algorithm.prior.sigma0.diagonal().head(kDimG));
        prior["var_beta"] =
            vec_to_json(algorithm.prior.sigma0.diagonal().segment(kDimG, kDimF));
        prior["noise_var"] = algorithm.prior.noise_var;

        json alg;
        alg["eta"] = algorithm.eta0.constant;
        alg["warmup_days"] = algorithm.warmup_days;
        alg["warmup_prob"] = algorithm.warmup_prob;
        if (algorithm.noise_var)
            alg["noise_var"] = *algorithm.noise_var;
        else
            alg["noise_var"] = nullptr;
        alg["prior"] = prior;

        json std_block;
        std_block["temperature"] = {{"shift", standardize.temperature.shift},
                                    {"scale", standardize.temperature.scale}};
        std_block["prior30"] = {{"shift", standardize.prior30.shift},
                                {"scale", standardize.prior30.scale}};
        std_block["yesterday"] = {{"shift", standardize.yesterday.shift},
                                  {"scale", standardize.yesterday.scale}};

        json features;
        features["engagement_rate"] = synth.features.engagement_rate;
        features["variation_rate"] = synth.features.variation_rate;
        features["location_rate"] = synth.features.location_rate;
        features["persistence"] = synth.features.persistence;
        features["temperature"] = {{"mean", synth.features.temperature_mean},
                                   {"sd", synth.features.temperature_sd}};
        features["prior30"] = {{"mean", synth.features.prior30_mean},
                               {"sd", synth.features.prior30_sd}};
        features["yesterday"] = {{"mean", synth.features.yesterday_mean},
                                 {"sd", synth.features.yesterday_sd}};

        json planted;
        planted["null_users"] = planted_null;
        planted["effect_users"] = planted_effect;
        planted["effect_size"] = planted_effect_size;
        if (planted_feature)
            planted["feature"] = fvar_name(*planted_feature);
        else
            planted["feature"] = nullptr;

        json sy;
        sy["users"] = synth.n_users;
        sy["horizon"] = synth.T;
        sy["availability"] = synth.availability_rate;
        sy["alpha"] = vec_to_json(synth.true_alpha);
        sy["beta"] = vec_to_json(synth.true_beta);
        sy["noise_sd"] = synth.noise_sd;
        sy["antised_rate"] = synth.antised_rate;
        sy["seed"] = effective_synth_seed();
        sy["warmup_days"] = synth.warmup_days;
        sy["warmup_prob"] = synth.warmup_prob;
        sy["features"] = features;
        sy["planted"] = planted;

        json grid;
        grid["delta"] = delta_grid;
        grid["gamma"] = gamma_grid;

        json e;
        e["master_seed"] = master_seed;
        e["resamples"] = resamples;
        e["emit_resample_scores"] = emit_resample_scores;
        e["ground_truth"] = ground_truth_name();
        e["score"] = {{"kind", score_kind_name()},
                      {"delta", score.delta},
                      {"gamma", score.gamma},
                      {"smoothing",
                       score.smoothing == Smoothing::raw ? "raw" : "smoothed"}};
        e["grid"] = grid;
        e["algorithm"] = alg;
        e["standardize"] = std_block;
        e["synth"] = sy;
        return e;
    }

    // 64-bit FNV-1a of the canonical (sorted-key, shortest-float) dump.
    std::string config_hash() const { return hash_hex(fnv1a64(echo().dump())); }
};

namespace config_detail {

inline FVar parse_fvar(const std::string& name, const std::string& path) {
    const std::optional<FVar> v = fvar_from_name(name);
    if (!v)
        fail(path, "unknown advantage feature '" + name +
                       "' (expected dosage, engagement, location or variation)");
    return *v;
}

inline void parse_score(const json& j, const std::string& path, ScoreConfig& score) {
    expect_keys(j, path, {"kind", "delta", "gamma", "smoothing"});
    const std::string kind = get_string(j, path, "kind", "type1");
    if (kind == "type1") {
        score.kind = ScoreKind::type1;
    } else if (kind.rfind("type2:", 0) == 0) {
        score.kind = ScoreKind::type2;
        score.feature = parse_fvar(kind.substr(6), join(path, "kind"));
    } else {
        fail(join(path, "kind"), "expected 'type1' or 'type2:<feature>', got '" +
                                     kind + "'");
    }
    score.delta = get_double(j, path, "delta", score.delta);
    score.gamma = get_double(j, path, "gamma", score.gamma);
    const std::string smoothing = get_string(j, path, "smoothing", "smoothed");
    if (smoothing == "raw")
        score.smoothing = Smoothing::raw;
    else if (smoothing == "smoothed")
        score.smoothing = Smoothing::smoothed;
    else
        fail(join(path, "smoothing"), "expected 'raw' or 'smoothed'");
    score.validate();
}

inline void parse_prior(const json& j, const std::string& path, Prior& prior) {
    expect_keys(j, path, {"mu_alpha", "mu_beta", "var_alpha", "var_beta", "noise_var"});
    Vec mu_alpha = prior.mu0.head(kDimG);
    Vec mu_beta = prior.mu0.segment(kDimG, kDimF);
    Vec var_alpha = prior.sigma0.diagonal().head(kDimG);
    Vec var_beta = prior.sigma0.diagonal().segment(kDimG, kDimF);
    mu_alpha = get_fixed_vec(j, path, "mu_alpha", kDimG, mu_alpha);
    mu_beta = get_fixed_vec(j, path, "mu_beta", kDimF, mu_beta);
    var_alpha = get_fixed_vec(j, path, "var_alpha", kDimG, var_alpha);
    var_beta = get_fixed_vec(j, path, "var_beta", kDimF, var_beta);
    prior.noise_var = get_double(j, path, "noise_var", prior.noise_var);
    prior.mu0.head(kDimG) = mu_alpha;
    prior.mu0.segment(kDimG, kDimF) = mu_beta;
    prior.mu0.tail(kDimF) = mu_beta;
    Vec diag(kDimTheta);
    diag.head(kDimG) = var_alpha;
    diag.segment(kDimG, kDimF) = var_beta;
    diag.tail(kDimF) = var_beta;
    prior.sigma0 = diag.asDiagonal();
    try {
        prior.validate();
    } catch (const error& e) {
        fail(path, e.what());
    }
}

inline void parse_algorithm(const json& j, const std::string& path,
                            AlgorithmConfig& alg) {
    expect_keys(j, path, {"eta", "warmup_days", "warmup_prob", "noise_var", "prior"});
    alg.eta0.constant = get_double(j, path, "eta", alg.eta0.constant);
    alg.warmup_days = get_int(j, path, "warmup_days", alg.warmup_days);
    alg.warmup_prob = get_double(j, path, "warmup_prob", alg.warmup_prob);
    if (j.contains("noise_var") && !j.at("noise_var").is_null())
        alg.noise_var = get_double(j, path, "noise_var", 0.0);
    if (j.contains("prior")) parse_prior(j.at("prior"), join(path, "prior"), alg.prior);
}

inline void parse_linear(const json& j, const std::string& path,
                         Standardize::Linear& lin) {
    expect_keys(j, path, {"shift", "scale"});
    lin.shift = get_double(j, path, "shift", lin.shift);
    lin.scale = get_double(j, path, "scale", lin.scale);
}

inline void parse_standardize(const json& j, const std::string& path,
                              Standardize& st) {
    expect_keys(j, path, {"temperature", "prior30", "yesterday"});
    if (j.contains("temperature"))
        parse_linear(j.at("temperature"), join(path, "temperature"), st.temperature);
    if (j.contains("prior30"))
        parse_linear(j.at("prior30"), join(path, "prior30"), st.prior30);
    if (j.contains("yesterday"))
        parse_linear(j.at("yesterday"), join(path, "yesterday"), st.yesterday);
    try {
        st.validate();
    } catch (const error& e) {
        fail(path, e.what());
    }
}

inline void parse_features(const json& j, const std::string& path,
                           FeatureProcess& f) {
    expect_keys(j, path,
                {"engagement_rate", "variation_rate", "location_rate", "persistence",
                 "temperature", "prior30", "yesterday"});
    f.engagement_rate = get_double(j, path, "engagement_rate", f.engagement_rate);
    f.variation_rate = get_double(j, path, "variation_rate", f.variation_rate);
    f.location_rate = get_double(j, path, "location_rate", f.location_rate);
    f.persistence = get_double(j, path, "persistence", f.persistence);
    auto moment = [&](const char* key, double& mean, double& sd) {
        if (!j.contains(key)) return;
        const std::string sub = join(path, key);
        expect_keys(j.at(key), sub, {"mean", "sd"});
        mean = get_double(j.at(key), sub, "mean", mean);
        sd = get_double(j.at(key), sub, "sd", sd);
    };
    moment("temperature", f.temperature_mean, f.temperature_sd);
    moment("prior30", f.prior30_mean, f.prior30_sd);
    moment("yesterday", f.yesterday_mean, f.yesterday_sd);
}

inline void parse_synth(const json& j, const std::string& path, RunConfig& cfg) {
    expect_keys(j, path,
                {"users", "horizon", "availability", "alpha", "beta", "noise_sd",
                 "antised_rate", "seed", "warmup_days", "warmup_prob", "features",
                 "planted"});
    SynthSpec& sy = cfg.synth;
    sy.n_users = get_int(j, path, "users", sy.n_users);
    sy.T = get_int(j, path, "horizon", sy.T);
    sy.availability_rate = get_double(j, path, "availability", sy.availability_rate);
    sy.true_alpha = get_fixed_vec(j, path, "alpha", kDimG, sy.true_alpha);
    sy.true_beta = get_fixed_vec(j, path, "beta", kDimF, sy.true_beta);
    sy.noise_sd = get_double(j, path, "noise_sd", sy.noise_sd);
    sy.antised_rate = get_double(j, path, "antised_rate", sy.antised_rate);
    if (j.contains("seed")) {
        sy.seed = get_u64(j, path, "seed", 0);
        cfg.synth_seed_given = true;
    }
    sy.warmup_days = get_int(j, path, "warmup_days", sy.warmup_days);
    sy.warmup_prob = get_double(j, path, "warmup_prob", sy.warmup_prob);
    if (j.contains("features"))
        parse_features(j.at("features"), join(path, "features"), sy.features);
    if (j.contains("planted")) {
        const json& p = j.at("planted");
        const std::string sub = join(path, "planted");
        expect_keys(p, sub, {"null_users", "effect_users", "effect_size", "feature"});
        cfg.planted_null = get_int(p, sub, "null_users", 0);
        cfg.planted_effect = get_int(p, sub, "effect_users", 0);
        cfg.planted_effect_size = get_double(p, sub, "effect_size", 0.0);
        if (p.contains("feature") && !p.at("feature").is_null())
            cfg.planted_feature =
                parse_fvar(get_string(p, sub, "feature", ""), join(sub, "feature"));
    }
}

}  // namespace config_detail

// Parse a "null-advantage" / "null-feature:<feature>" ground-truth name
// (config key and --ground-truth flag share this grammar).
inline void set_ground_truth(RunConfig& cfg, const std::string& name) {
    if (name == "null-advantage") {
        cfg.ground_truth_kind = GroundTruthKind::null_advantage;
    } else if (name.rfind("null-feature:", 0) == 0) {
        cfg.ground_truth_kind = GroundTruthKind::null_feature;
        cfg.ground_truth_feature =
            config_detail::parse_fvar(name.substr(13), "ground_truth");
    } else {
        config_detail::fail(
            "ground_truth",
            "expected 'null-advantage' or 'null-feature:<feature>', got '" + name + "'");
    }
}

inline RunConfig parse_config(const nlohmann::json& j) {
    using namespace config_detail;
    RunConfig cfg;
    expect_keys(j, "",
                {"master_seed", "workers", "resamples", "emit_resample_scores",
                 "ground_truth", "score", "grid", "algorithm", "standardize", "synth"});
    cfg.master_seed = get_u64(j, "", "master_seed", cfg.master_seed);
    cfg.workers = get_int(j, "", "workers", cfg.workers);
    if (cfg.workers < 1) fail("workers", "must be >= 1");
    cfg.resamples = get_int(j, "", "resamples", cfg.resamples);
    if (cfg.resamples < 1) fail("resamples", "must be >= 1");
    cfg.emit_resample_scores =
        get_bool(j, "", "emit_resample_scores", cfg.emit_resample_scores);
    set_ground_truth(cfg, get_string(j, "", "ground_truth", "null-advantage"));
    if (j.contains("score")) parse_score(j.at("score"), "score", cfg.score);
    if (j.contains("grid")) {
        const nlohmann::json& g = j.at("grid");
        expect_keys(g, "grid", {"delta", "gamma"});
        cfg.delta_grid = get_double_array(g, "grid", "delta", {});
        cfg.gamma_grid = get_double_array(g, "grid", "gamma", {});
    }
    if (j.contains("algorithm"))
        parse_algorithm(j.at("algorithm"), "algorithm", cfg.algorithm);
    if (j.contains("standardize"))
        parse_standardize(j.at("standardize"), "standardize", cfg.standardize);
    if (j.contains("synth")) parse_synth(j.at("synth"), "synth", cfg);
    cfg.study_config().validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("config ") + path + ": " + e.what());
    }
    try {
        return parse_config(j);
    } catch (const data_error& e) {
        throw data_error(path + ": " + e.what());
    }
}

}  // namespace banditaudit::io
