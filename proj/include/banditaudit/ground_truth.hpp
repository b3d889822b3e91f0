#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "banditaudit/reward_fit.hpp"
#include "banditaudit/trajectory.hpp"

namespace banditaudit {

// Defaults of the deployed algorithm: the first seven days randomize at a
// fixed probability while the posterior warms up.
inline constexpr int kDefaultWarmupDays = 7;
inline constexpr double kDefaultWarmupProb = 0.25;

// Everything held fixed when a user's trajectory is resampled: the
// exogenous inputs (availability, context, anti-sedentary treatments,
// missingness), the replayed residuals, and the ground-truth reward model
// (alpha, beta, noise via residual replay).  The prior, threshold policy
// and warmup settings reproduce the deployed algorithm's configuration.
struct GroundTruthModel {
    struct Exogenous {
        bool available = false;
        ContextFeatures context;
        bool anti_sedentary = false;
        bool missing = false;
    };

    std::string user_id;
    std::vector<Exogenous> exogenous;              // indexed by t-1
    std::vector<std::optional<double>> residuals;  // indexed by t-1
    Vec alpha;  // dimension 8
    Vec beta;   // dimension 5
    Prior prior;
    ThresholdPolicy eta0;
    int warmup_days = kDefaultWarmupDays;
    double warmup_prob = kDefaultWarmupProb;

    int horizon() const { return static_cast<int>(exogenous.size()); }

    void validate() const {
        if (exogenous.empty())
            throw data_error("ground truth " + user_id + ": no decision times");
        if (residuals.size() != exogenous.size())
            throw data_error("ground truth " + user_id +
                             ": residuals must align with decision times");
        if (alpha.size() != kDimG || beta.size() != kDimF)
            throw data_error("ground truth " + user_id + ": coefficient dimensions");
        if (!alpha.allFinite() || !beta.allFinite())
            throw data_error("ground truth " + user_id + ": non-finite coefficients");
        prior.validate();
        if (warmup_days < 0 || warmup_days * kPointsPerDay > horizon())
            throw data_error("ground truth " + user_id +
                             ": warmup must fit inside the horizon");
        if (!(warmup_prob >= 0.0 && warmup_prob <= 1.0))
            throw data_error("ground truth " + user_id + ": warmup_prob outside [0, 1]");
    }
};

// Residuals of the fitted working model on the logged data:
//   eps_t = R_t - alpha' g(s_t) - A_t beta' f(s_t)
// for decision times that are available, not missing, and carry a reward;
// absent elsewhere.  These are replayed verbatim as the noise of every
// resample, so the resampled rewards keep the empirical noise texture.
inline std::vector<std::optional<double>> compute_residuals(const Trajectory& traj,
                                                            const Vec& alpha,
                                                            const Vec& beta) {
    if (alpha.size() != kDimG || beta.size() != kDimF)
        throw data_error("compute_residuals: coefficient dimensions");
    std::vector<std::optional<double>> out(traj.points.size());
    for (const DecisionPoint& p : traj.points) {
        if (!(p.available && !p.missing && p.reward.has_value())) continue;
        const double a = static_cast<double>(p.action.value_or(0));
        const double mean = alpha.dot(build_g(p)) + a * beta.dot(build_f(p));
        out[static_cast<size_t>(p.t - 1)] = *p.reward - mean;
    }
    return out;
}

namespace ground_truth_detail {

inline GroundTruthModel base_model(const Trajectory& traj, const FittedRewardModel& fit,
                                   const Prior& prior) {
    traj.validate();
    GroundTruthModel model;
    model.user_id = traj.user_id;
    model.exogenous.reserve(traj.points.size());
    for (const DecisionPoint& p : traj.points)
        model.exogenous.push_back(
            {p.available, p.context, p.anti_sedentary, p.missing});
    model.residuals = compute_residuals(traj, fit.alpha, fit.beta);
    model.alpha = fit.alpha;
    model.beta = fit.beta;
    model.prior = prior;
    model.prior.noise_var = fit.noise_var;
    return model;
}

}  // namespace ground_truth_detail

// Null ground truth with no treatment effect at all: beta = 0, so the
// resampled rewards do not depend on the resampled actions.
inline GroundTruthModel make_null_advantage_model(const Trajectory& traj,
                                                  const FittedRewardModel& fit,
                                                  const Prior& prior) {
    GroundTruthModel model = ground_truth_detail::base_model(traj, fit, prior);
    model.beta = Vec::Zero(kDimF);
    model.validate();
    return model;
}

// Null ground truth with one advantage coefficient removed: the effect of
// `feature` is zeroed while the rest of the fitted beta is kept.  The
// intercept is not a feature here; "no effect at all" is the
// advantage-null model above.
inline GroundTruthModel make_null_feature_model(const Trajectory& traj,
                                                const FittedRewardModel& fit,
                                                const Prior& prior, FVar feature) {
    GroundTruthModel model = ground_truth_detail::base_model(traj, fit, prior);
    model.beta[fvar_index(feature)] = 0.0;
    model.validate();
    return model;
}

}  // namespace banditaudit
