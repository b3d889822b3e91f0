#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "banditaudit/generic_sim.hpp"

namespace banditaudit {

// Marginal processes for the exogenous context features.  Binary features
// are Bernoulli draws; `persistence` (0 = i.i.d.) is the probability that
// variation/location carry their previous value instead of redrawing,
// giving controllable within-user streaks.
struct FeatureProcess {
    double engagement_rate = 0.5;
    double variation_rate = 0.5;
    double location_rate = 0.5;
    double persistence = 0.0;
    double temperature_mean = 0.0, temperature_sd = 1.0;
    double prior30_mean = 0.0, prior30_sd = 1.0;
    double yesterday_mean = 0.0, yesterday_sd = 1.0;

    void validate() const {
        auto prob = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0))
                throw data_error(std::string("synth spec: ") + name +
                                 " must be in [0, 1]");
        };
        prob(engagement_rate, "engagement_rate");
        prob(variation_rate, "variation_rate");
        prob(location_rate, "location_rate");
        prob(persistence, "persistence");
        if (!(temperature_sd >= 0.0 && prior30_sd >= 0.0 && yesterday_sd >= 0.0))
            throw data_error("synth spec: feature sds must be >= 0");
    }
};

// Specification of a synthetic trial with known ground truth.  Trajectories
// are produced by actually running the rerun algorithm (warmup, Thompson
// sampling, nightly updates) against rewards drawn from the working model
// with coefficients (true_alpha, true_beta) and N(0, noise_sd^2) noise, so
// the data-collection process matches a real deployment.
struct SynthSpec {
    int n_users = 10;
    int T = 450;  // 90 days
    double availability_rate = 0.8;
    FeatureProcess features;
    Vec true_alpha = Vec::Zero(kDimG);
    Vec true_beta = Vec::Zero(kDimF);
    double noise_sd = 1.0;  // 0 is allowed and collapses the reward noise
    double antised_rate = 0.1;
    uint64_t seed = 0;
    int warmup_days = kDefaultWarmupDays;
    double warmup_prob = kDefaultWarmupProb;

    void validate() const {
        if (n_users < 0) throw data_error("synth spec: n_users must be >= 0");
        if (T < 1) throw data_error("synth spec: T must be >= 1");
        if (!(availability_rate >= 0.0 && availability_rate <= 1.0))
            throw data_error("synth spec: availability_rate must be in [0, 1]");
        if (!(antised_rate >= 0.0 && antised_rate <= 1.0))
            throw data_error("synth spec: antised_rate must be in [0, 1]");
        if (!(noise_sd >= 0.0)) throw data_error("synth spec: noise_sd must be >= 0");
        if (true_alpha.size() != kDimG || true_beta.size() != kDimF)
            throw data_error("synth spec: coefficient dimensions");
        if (warmup_days < 0 || warmup_days * kPointsPerDay > T)
            throw data_error("synth spec: warmup must fit inside the horizon");
        if (!(warmup_prob >= 0.0 && warmup_prob <= 1.0))
            throw data_error("synth spec: warmup_prob must be in [0, 1]");
        features.validate();
    }
};

namespace synth_detail {

inline std::string format_user_id(const std::string& prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%03d", prefix.c_str(), index);
    return buf;
}

// Generate one user.  Per decision time the stream is consumed in a fixed
// order (availability, engagement, variation, location, temperature,
// prior-30, yesterday, anti-sedentary, then the engine's action draw, then
// the reward noise), which pins the output for a given (seed, user) pair.
inline Trajectory generate_user(const SynthSpec& spec, const Prior& prior,
                                const std::string& user_id, RngStream& stream) {
    GenericSimConfig config;
    config.user_id = user_id;
    config.T = spec.T;
    config.prior = prior;
    // The algorithm runs with the data-generating noise scale (floored so
    // the posterior update stays proper when noise_sd = 0).
    config.prior.noise_var = std::max(spec.noise_sd * spec.noise_sd, kResidualVarFloor);
    config.warmup_days = spec.warmup_days;
    config.warmup_prob = spec.warmup_prob;

    GenericSimHooks hooks;
    hooks.transition = [&spec](int t, const std::vector<DecisionPoint>& history,
                               RngStream& rng) {
        GroundTruthModel::Exogenous exo;
        exo.available = rng.bernoulli(spec.availability_rate);
        const FeatureProcess& fp = spec.features;
        exo.context.engagement = rng.bernoulli(fp.engagement_rate) ? 1.0 : 0.0;
        if (t > 1 && rng.bernoulli(fp.persistence)) {
            exo.context.variation = history.back().context.variation;
        } else {
            exo.context.variation = rng.bernoulli(fp.variation_rate) ? 1.0 : 0.0;
        }
        if (t > 1 && rng.bernoulli(fp.persistence)) {
            exo.context.location = history.back().context.location;
        } else {
            exo.context.location = rng.bernoulli(fp.location_rate) ? 1.0 : 0.0;
        }
        exo.context.temperature = rng.normal(fp.temperature_mean, fp.temperature_sd);
        exo.context.prior_30min_steps = rng.normal(fp.prior30_mean, fp.prior30_sd);
        exo.context.yesterday_steps = rng.normal(fp.yesterday_mean, fp.yesterday_sd);
        exo.anti_sedentary = rng.bernoulli(spec.antised_rate);
        exo.missing = false;
        return exo;
    };
    hooks.reward = [&spec](const DecisionPoint& p, int action, double /*delta*/,
                           RngStream& rng) -> std::optional<double> {
        const double mean = spec.true_alpha.dot(build_g(p)) +
                            static_cast<double>(action) * spec.true_beta.dot(build_f(p));
        return mean + spec.noise_sd * rng.normal();
    };

    const ResampledTrajectory run = simulate_generic(config, hooks, stream);
    Trajectory traj;
    traj.user_id = user_id;
    traj.points = run.points;
    traj.posterior_update_log = run.stream.update_log;
    traj.validate();
    return traj;
}

}  // namespace synth_detail

// Generate a synthetic trial of spec.n_users users.  Deterministic in
// spec.seed; user u gets the stream (seed, synth_user, u, 0) so cohorts
// can be extended without disturbing earlier users.
inline std::vector<Trajectory> generate_trial(const SynthSpec& spec,
                                              const Prior& prior = make_default_prior()) {
    spec.validate();
    std::vector<Trajectory> out;
    out.reserve(static_cast<size_t>(spec.n_users));
    for (int u = 1; u <= spec.n_users; ++u) {
        RngStream stream = make_stream(spec.seed, StreamPurpose::synth_user,
                                       static_cast<uint64_t>(u), 0);
        out.push_back(synth_detail::generate_user(
            spec, prior, synth_detail::format_user_id("synth", u), stream));
    }
    return out;
}

struct PlantedCohort {
    std::vector<Trajectory> trajectories;  // null users first, then effect users
    std::vector<uint8_t> is_effect;        // parallel labels
};

// Cohort with a planted effect: n_null users whose target advantage
// coefficient is zeroed and n_effect users whose target coefficient is set
// to effect_size (other coefficients follow spec.true_beta).  The default
// target is the advantage intercept; pass a feature for targeted effects.
inline PlantedCohort planted_cohort(const SynthSpec& spec, int n_null, int n_effect,
                                    double effect_size,
                                    std::optional<FVar> target = std::nullopt,
                                    const Prior& prior = make_default_prior()) {
    if (n_null < 0 || n_effect < 0)
        throw data_error("planted_cohort: user counts must be >= 0");
    if (!(effect_size >= 0.0))
        throw data_error("planted_cohort: effect_size must be >= 0");
    const int coord = target ? fvar_index(*target) : 0;

    SynthSpec null_spec = spec;
    null_spec.true_beta[coord] = 0.0;
    SynthSpec effect_spec = spec;
    effect_spec.true_beta[coord] = effect_size;
    null_spec.validate();
    effect_spec.validate();

    PlantedCohort cohort;
    for (int u = 1; u <= n_null + n_effect; ++u) {
        const bool effect = u > n_null;
        const SynthSpec& user_spec = effect ? effect_spec : null_spec;
        RngStream stream = make_stream(spec.seed, StreamPurpose::synth_user,
                                       static_cast<uint64_t>(u), 0);
        const std::string id = effect
                                   ? synth_detail::format_user_id("effect", u - n_null)
                                   : synth_detail::format_user_id("null", u);
        cohort.trajectories.push_back(
            synth_detail::generate_user(user_spec, prior, id, stream));
        cohort.is_effect.push_back(effect ? 1 : 0);
    }
    return cohort;
}

}  // namespace banditaudit
