#pragma once

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

#include "banditaudit/replay.hpp"

namespace banditaudit {

// Hook-driven variant of the rerun loop, for simulation designs beyond
// frozen-input residual replay.  The engine owns the algorithm side
// (posterior bookkeeping, dosage recursion, nightly cadence); the hooks own
// the environment and can also override the policy and update rule.
//
// Instantiated with point-mass transitions and residual-replay rewards it
// reproduces `resample_trajectory` exactly (covered by tests).
struct GenericSimHooks {
    // Exogenous state of time t (available, context, anti_sedentary,
    // missing); may consult the simulated history so far.
    std::function<GroundTruthModel::Exogenous(int t, const std::vector<DecisionPoint>&,
                                              RngStream&)>
        transition;

    // Reward for an available time, or nullopt for a missing payload.
    // `point` already carries context/dosage; `delta` is the standardized
    // advantage the policy saw.
    std::function<std::optional<double>(const DecisionPoint& point, int action,
                                        double delta, RngStream&)>
        reward;

    // Randomization probability; defaults to the deployed rule
    // (warmup constant, then h(Phi(delta))).  A tape policy returning 0/1
    // point masses forces a recorded action sequence.
    std::function<double(int t, double delta, double default_prob)> policy;

    // Nightly update rule; defaults to the conjugate Gaussian update.
    std::function<PosteriorState(const PosteriorState&, const Prior&,
                                 const std::vector<DayObservation>&)>
        update;
};

struct GenericSimConfig {
    std::string user_id = "generic";
    int T = 0;
    Prior prior;
    ThresholdPolicy eta0;
    int warmup_days = kDefaultWarmupDays;
    double warmup_prob = kDefaultWarmupProb;
};

inline ResampledTrajectory simulate_generic(const GenericSimConfig& config,
                                            const GenericSimHooks& hooks,
                                            RngStream& stream,
                                            uint64_t seed_tag = 0) {
    if (config.T < 0) throw data_error("simulate_generic: negative horizon");
    if (!hooks.transition || !hooks.reward)
        throw data_error("simulate_generic: transition and reward hooks are required");
    config.prior.validate();
    const int T = config.T;
    const int D = day_of(std::max(T, 1));
    const int warmup_end = config.warmup_days * kPointsPerDay;

    ResampledTrajectory out;
    out.user_id = config.user_id;
    out.seed_tag = seed_tag;
    ForecastStream& fs = out.stream;
    fs.T = T;
    fs.D = T == 0 ? 0 : D;
    fs.available.resize(static_cast<size_t>(T));
    fs.missing.resize(static_cast<size_t>(T));
    fs.context.resize(static_cast<size_t>(T));
    fs.dosage.resize(static_cast<size_t>(T));
    fs.advantage.resize(static_cast<size_t>(T));
    fs.update_log.assign(static_cast<size_t>(fs.D), 0);
    fs.day_snapshot.resize(static_cast<size_t>(fs.D));
    fs.eta = config.eta0;

    PosteriorState state = make_initial_state(config.prior, config.eta0);
    double dosage = 0.0;
    std::vector<DayObservation> day_batch;
    int day_available = 0;

    for (int t = 1; t <= T; ++t) {
        const int d = day_of(t);
        if ((t - 1) % kPointsPerDay == 0) {
            auto [bmu, bsig] = beta_marginal(state);
            fs.day_snapshot[static_cast<size_t>(d - 1)] = {std::move(bmu),
                                                           std::move(bsig)};
        }
        const GroundTruthModel::Exogenous exo =
            hooks.transition(t, out.points, stream);

        DecisionPoint p;
        p.t = t;
        p.day = d;
        p.available = exo.available;
        p.context = exo.context;
        p.anti_sedentary = exo.anti_sedentary;
        p.missing = exo.missing;
        p.dosage = dosage;

        int action = 0;
        if (exo.available) {
            ++day_available;
            const BetaSnapshot& snap = fs.day_snapshot[static_cast<size_t>(d - 1)];
            const Vec f = build_f(p);
            const double eta = eta_evaluate(state.eta, dosage);
            const double delta = standardized_advantage(snap.mu, snap.sigma, f, eta);
            const double default_prob =
                (t <= warmup_end) ? config.warmup_prob : action_probability(delta);
            const double prob =
                hooks.policy ? hooks.policy(t, delta, default_prob) : default_prob;
            if (!(prob >= 0.0 && prob <= 1.0))
                throw data_error("simulate_generic: policy hook probability outside [0, 1]");
            action = sample_action(prob, stream);
            p.action = action;
            p.action_prob = prob;
            fs.advantage[static_cast<size_t>(t - 1)] = delta;

            const std::optional<double> r = hooks.reward(p, action, delta, stream);
            if (!exo.missing && r.has_value()) {
                p.reward = *r;
                day_batch.push_back({build_phi(p, action, prob), *p.reward, true});
            }
        }

        fs.available[static_cast<size_t>(t - 1)] = exo.available ? 1 : 0;
        fs.missing[static_cast<size_t>(t - 1)] = exo.missing ? 1 : 0;
        fs.context[static_cast<size_t>(t - 1)] = exo.context;
        fs.dosage[static_cast<size_t>(t - 1)] = dosage;
        out.points.push_back(p);

        if (t % kPointsPerDay == 0) {
            if (day_available >= 1) {
                fs.update_log[static_cast<size_t>(d - 1)] = 1;
                state = hooks.update
                            ? hooks.update(state, config.prior, day_batch)
                            : posterior_update(state, config.prior, day_batch);
            }
            day_batch.clear();
            day_available = 0;
        }
        dosage = update_dosage(dosage, action, exo.anti_sedentary ? 1 : 0);
    }
    return out;
}

}  // namespace banditaudit
