#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "banditaudit/forecast.hpp"
#include "banditaudit/ground_truth.hpp"
#include "banditaudit/policy.hpp"
#include "banditaudit/posterior.hpp"

namespace banditaudit {

// One algorithm rerun over frozen exogenous inputs: the simulated decision
// sequence plus the forecast stream consumed by scoring.
struct ResampledTrajectory {
    std::string user_id;
    uint64_t seed_tag = 0;  // caller's stream identifier (e.g. resample index)
    std::vector<DecisionPoint> points;
    ForecastStream stream;
};

// Rerun the deployed algorithm once against a ground-truth model.
//
// The loop per decision time t (day d = ceil(t/5)):
//   - dosage follows the recursion from X_0 = 0 using the *simulated*
//     actions and the frozen anti-sedentary indicators;
//   - at available times the standardized advantage is computed from the
//     posterior in effect (recorded warmup included), the randomization
//     probability is the warmup constant during the first warmup days and
//     h(Phi(delta)) afterwards, and the action is drawn from `stream`;
//   - the simulated reward replays the logged residual on top of the
//     ground-truth mean, and is missing exactly where the logged payload
//     was missing (no residual available);
//   - after each complete day (t divisible by 5) with at least one
//     available time, the nightly conjugate update runs on the day's
//     usable observations (available, not missing).
//
// All randomness comes from `stream`; one Bernoulli draw per available
// time, nothing else.
inline ResampledTrajectory resample_trajectory(const GroundTruthModel& model,
                                               RngStream& stream,
                                               uint64_t seed_tag = 0) {
    model.validate();
    const int T = model.horizon();
    const int D = day_of(T);
    const int warmup_end = model.warmup_days * kPointsPerDay;

    ResampledTrajectory out;
    out.user_id = model.user_id;
    out.seed_tag = seed_tag;
    out.points.reserve(static_cast<size_t>(T));
    ForecastStream& fs = out.stream;
    fs.T = T;
    fs.D = D;
    fs.available.resize(static_cast<size_t>(T));
    fs.missing.resize(static_cast<size_t>(T));
    fs.context.resize(static_cast<size_t>(T));
    fs.dosage.resize(static_cast<size_t>(T));
    fs.advantage.resize(static_cast<size_t>(T));
    fs.update_log.assign(static_cast<size_t>(D), 0);
    fs.day_snapshot.resize(static_cast<size_t>(D));
    fs.eta = model.eta0;

    PosteriorState state = make_initial_state(model.prior, model.eta0);
    double dosage = 0.0;  // X_1 = 0.95 * X_0 + max(A_0, B_0) with everything 0
    std::vector<DayObservation> day_batch;
    int day_available = 0;

    for (int t = 1; t <= T; ++t) {
        const int d = day_of(t);
        if ((t - 1) % kPointsPerDay == 0) {
            auto [bmu, bsig] = beta_marginal(state);
            fs.day_snapshot[static_cast<size_t>(d - 1)] = {std::move(bmu),
                                                           std::move(bsig)};
        }
        const GroundTruthModel::Exogenous& exo =
            model.exogenous[static_cast<size_t>(t - 1)];

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
            const double prob =
                (t <= warmup_end) ? model.warmup_prob : action_probability(delta);
            action = sample_action(prob, stream);
            p.action = action;
            p.action_prob = prob;
            fs.advantage[static_cast<size_t>(t - 1)] = delta;

            const std::optional<double>& residual =
                model.residuals[static_cast<size_t>(t - 1)];
            if (!exo.missing && residual.has_value()) {
                const double mean = model.alpha.dot(build_g(p)) +
                                    static_cast<double>(action) * model.beta.dot(f);
                p.reward = mean + *residual;
                day_batch.push_back({build_phi(p, action, prob), *p.reward, true});
            }
        }

        fs.available[static_cast<size_t>(t - 1)] = exo.available ? 1 : 0;
        fs.missing[static_cast<size_t>(t - 1)] = exo.missing ? 1 : 0;
        fs.context[static_cast<size_t>(t - 1)] = exo.context;
        fs.dosage[static_cast<size_t>(t - 1)] = dosage;
        out.points.push_back(p);

        if (t % kPointsPerDay == 0) {
            // Nightly update guard: complete day with at least one
            // available decision.  Short final days never update.
            if (day_available >= 1) {
                fs.update_log[static_cast<size_t>(d - 1)] = 1;
                state = posterior_update(state, model.prior, day_batch);
            }
            day_batch.clear();
            day_available = 0;
        }
        dosage = update_dosage(dosage, action, exo.anti_sedentary ? 1 : 0);
    }
    return out;
}

// Recompute the forecast stream of a *logged* trajectory by running the
// algorithm's bookkeeping over the recorded actions, probabilities and
// rewards: posterior states follow the same nightly cadence, and the
// standardized advantage is recorded at every available time.  Used to
// score the observed data on exactly the footing of the resamples.
//
// When a recorded randomization probability is absent it is reconstructed
// (warmup constant during warmup, h(Phi(delta)) after).
inline ForecastStream reconstruct_forecasts(const Trajectory& traj, const Prior& prior,
                                            const ThresholdPolicy& eta0 = {},
                                            int warmup_days = kDefaultWarmupDays,
                                            double warmup_prob = kDefaultWarmupProb) {
    traj.validate();
    const int T = traj.total_points();
    const int D = traj.total_days();
    const int warmup_end = warmup_days * kPointsPerDay;

    ForecastStream fs;
    fs.T = T;
    fs.D = D;
    fs.available.resize(static_cast<size_t>(T));
    fs.missing.resize(static_cast<size_t>(T));
    fs.context.resize(static_cast<size_t>(T));
    fs.dosage.resize(static_cast<size_t>(T));
    fs.advantage.resize(static_cast<size_t>(T));
    fs.update_log.assign(static_cast<size_t>(D), 0);
    fs.day_snapshot.resize(static_cast<size_t>(D));
    fs.eta = eta0;

    PosteriorState state = make_initial_state(prior, eta0);
    std::vector<DayObservation> day_batch;
    int day_available = 0;

    for (int t = 1; t <= T; ++t) {
        const int d = day_of(t);
        if ((t - 1) % kPointsPerDay == 0) {
            auto [bmu, bsig] = beta_marginal(state);
            fs.day_snapshot[static_cast<size_t>(d - 1)] = {std::move(bmu),
                                                           std::move(bsig)};
        }
        const DecisionPoint& p = traj.at(t);
        fs.available[static_cast<size_t>(t - 1)] = p.available ? 1 : 0;
        fs.missing[static_cast<size_t>(t - 1)] = p.missing ? 1 : 0;
        fs.context[static_cast<size_t>(t - 1)] = p.context;
        fs.dosage[static_cast<size_t>(t - 1)] = p.dosage;

        if (p.available) {
            ++day_available;
            const BetaSnapshot& snap = fs.day_snapshot[static_cast<size_t>(d - 1)];
            const Vec f = build_f(p);
            const double eta = eta_evaluate(state.eta, p.dosage);
            const double delta = standardized_advantage(snap.mu, snap.sigma, f, eta);
            fs.advantage[static_cast<size_t>(t - 1)] = delta;
            if (!p.missing && p.reward.has_value()) {
                const double prob = p.action_prob.value_or(
                    t <= warmup_end ? warmup_prob : action_probability(delta));
                day_batch.push_back(
                    {build_phi(p, p.action.value_or(0), prob), *p.reward, true});
            }
        }

        if (t % kPointsPerDay == 0) {
            if (day_available >= 1) {
                fs.update_log[static_cast<size_t>(d - 1)] = 1;
                state = posterior_update(state, prior, day_batch);
            }
            day_batch.clear();
            day_available = 0;
        }
    }
    return fs;
}

}  // namespace banditaudit
