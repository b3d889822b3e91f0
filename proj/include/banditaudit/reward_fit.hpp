#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "banditaudit/posterior.hpp"
#include "banditaudit/trajectory.hpp"

namespace banditaudit {

// Per-user working reward model fitted offline from a logged trajectory.
struct FittedRewardModel {
    Vec alpha;           // dimension 8, baseline effects
    Vec beta;            // dimension 5, advantage (treatment) effects
    double noise_var = 1.0;      // sigma^2 the fit was run with
    double residual_var = 1.0;   // mean squared residual of this fit (floored)
    int n_used = 0;              // usable decision times
};

inline constexpr double kResidualVarFloor = 1e-6;

namespace fit_detail {

inline bool usable_point(const DecisionPoint& p) {
    return p.available && !p.missing && p.reward.has_value();
}

inline int recorded_action(const DecisionPoint& p) { return p.action.value_or(0); }

}  // namespace fit_detail

// Ridge / MAP fit of (alpha, beta) from the usable decision times
// (available, not missing, reward recorded) of one trajectory:
//   argmin (1/s2) sum_t I_t (R_t - phi~_t' theta)^2 + (theta - m)' S^{-1} (theta - m)
// with (m, S) the prior's 13-dimensional (alpha, beta) sub-prior and
// s2 = prior.noise_var.  Solved in closed form via the normal equations.
inline FittedRewardModel fit_reward_model(const Trajectory& traj, const Prior& prior) {
    prior.validate();
    const double s2 = prior.noise_var;
    const Vec m = prior.mu_fit();
    const Mat s_inv = posterior_detail::spd_inverse(
        prior.sigma_fit(), "fit_reward_model(" + traj.user_id + ")");

    Mat info = s_inv;
    Vec lead = s_inv * m;
    int used = 0;
    for (const DecisionPoint& p : traj.points) {
        if (!fit_detail::usable_point(p)) continue;
        const Vec phi = build_phi_tilde(p, fit_detail::recorded_action(p));
        info.noalias() += phi * phi.transpose() / s2;
        lead.noalias() += phi * (*p.reward) / s2;
        ++used;
    }
    if (used == 0)
        throw model_error("fit_reward_model: no usable decision times for user " +
                          traj.user_id);

    info = 0.5 * (info + info.transpose());
    Eigen::LLT<Mat> llt(info);
    if (llt.info() != Eigen::Success)
        throw numeric_error("fit_reward_model: singular system for user " +
                            traj.user_id);
    const Vec theta = llt.solve(lead);

    FittedRewardModel fit;
    fit.alpha = theta.head(kDimG);
    fit.beta = theta.tail(kDimF);
    fit.noise_var = s2;
    fit.n_used = used;

    double ss = 0.0;
    for (const DecisionPoint& p : traj.points) {
        if (!fit_detail::usable_point(p)) continue;
        const Vec phi = build_phi_tilde(p, fit_detail::recorded_action(p));
        const double r = *p.reward - phi.dot(theta);
        ss += r * r;
    }
    fit.residual_var = std::max(ss / used, kResidualVarFloor);
    return fit;
}

// Fit with the noise variance estimated from the data: a first pass at the
// prior's noise variance supplies residuals, their mean square (floored)
// becomes sigma^2 for the definitive second pass.  The returned model
// carries the second pass's residual variance as its noise_var, which is
// what downstream simulation uses.
inline FittedRewardModel fit_with_estimated_noise(const Trajectory& traj,
                                                  const Prior& prior) {
    const FittedRewardModel pass1 = fit_reward_model(traj, prior);
    Prior refit = prior;
    refit.noise_var = pass1.residual_var;
    FittedRewardModel pass2 = fit_reward_model(traj, refit);
    pass2.noise_var = pass2.residual_var;
    return pass2;
}

}  // namespace banditaudit
