#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "banditaudit/policy.hpp"
#include "banditaudit/types.hpp"

namespace banditaudit {

// Gaussian prior over the joint working-model parameter
// theta = (alpha0, alpha1, beta) in R^18, plus the reward noise variance.
// sigma0 is block diagonal over the three parameter groups.
struct Prior {
    Vec mu0;            // dimension 18
    Mat sigma0;         // 18 x 18
    double noise_var = 1.0;

    void validate() const {
        if (mu0.size() != kDimTheta || sigma0.rows() != kDimTheta ||
            sigma0.cols() != kDimTheta)
            throw data_error("prior: expected dimension 18");
        if (!mu0.allFinite() || !sigma0.allFinite())
            throw data_error("prior: non-finite entries");
        if (!(noise_var > 0.0) || !std::isfinite(noise_var))
            throw data_error("prior: noise_var must be positive");
        if ((sigma0 - sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw data_error("prior: sigma0 not symmetric");
        // Exact block-diagonal structure over (alpha0, alpha1, beta).
        auto in_same_block = [](int i, int j) {
            auto block = [](int k) { return k < kDimG ? 0 : (k < kDimG + kDimF ? 1 : 2); };
            return block(i) == block(j);
        };
        for (int i = 0; i < kDimTheta; ++i)
            for (int j = 0; j < kDimTheta; ++j)
                if (!in_same_block(i, j) && sigma0(i, j) != 0.0)
                    throw data_error("prior: sigma0 must be block diagonal");
        if (Eigen::LLT<Mat>(sigma0).info() != Eigen::Success)
            throw data_error("prior: sigma0 not positive definite");
    }

    // Sub-prior over (alpha, beta) in R^13 used by the reward-model fit:
    // the baseline block and one advantage block.
    Vec mu_fit() const {
        Vec m(kDimThetaTilde);
        m.head(kDimG) = mu0.head(kDimG);
        m.tail(kDimF) = mu0.tail(kDimF);
        return m;
    }
    Mat sigma_fit() const {
        Mat s = Mat::Zero(kDimThetaTilde, kDimThetaTilde);
        s.topLeftCorner(kDimG, kDimG) = sigma0.topLeftCorner(kDimG, kDimG);
        s.bottomRightCorner(kDimF, kDimF) = sigma0.bottomRightCorner(kDimF, kDimF);
        return s;
    }
};

// Informative prior the deployed algorithm ran with.  Means and variances
// come from the historical pilot fits; the two advantage blocks (alpha1 and
// beta) share the same marginal prior.
inline Prior make_default_prior() {
    Prior prior;
    prior.mu0 = Vec(kDimTheta);
    Vec mu_alpha0(kDimG);
    // (intercept, temperature, prior 30-min steps, yesterday steps, dosage,
    //  engagement, location, variation)
    mu_alpha0 << 0.82, 1.95, 3.81, -0.19, 0.76, 0.0, -0.92, 0.0;
    Vec mu_beta(kDimF);
    mu_beta << 0.47, 0.0, 0.0, 0.0, 0.0;
    prior.mu0.head(kDimG) = mu_alpha0;
    prior.mu0.segment(kDimG, kDimF) = mu_beta;
    prior.mu0.tail(kDimF) = mu_beta;

    Vec var_alpha0(kDimG);
    var_alpha0 << 14.24, 13.35, 3.24, 0.57, 19.00, 0.26, 17.00, 7.35;
    Vec var_beta(kDimF);
    var_beta << 4.93, 24.56, 4.95, 0.67, 0.82;
    prior.sigma0 = Mat::Zero(kDimTheta, kDimTheta);
    prior.sigma0.topLeftCorner(kDimG, kDimG) = var_alpha0.asDiagonal();
    prior.sigma0.block(kDimG, kDimG, kDimF, kDimF) = var_beta.asDiagonal();
    prior.sigma0.bottomRightCorner(kDimF, kDimF) = var_beta.asDiagonal();

    prior.noise_var = 1.0;
    prior.validate();
    return prior;
}

// Posterior over theta after the nightly update of day `day`
// (day 0 = prior).  Carries the threshold policy so that adaptive
// thresholds advance with the posterior.
struct PosteriorState {
    int day = 0;
    Vec mu;
    Mat sigma;
    ThresholdPolicy eta;
};

inline PosteriorState make_initial_state(const Prior& prior,
                                         ThresholdPolicy eta = {}) {
    prior.validate();
    return PosteriorState{0, prior.mu0, prior.sigma0, std::move(eta)};
}

namespace posterior_detail {

// Invert an SPD matrix by Cholesky; one jitter retry (+1e-10 I) before
// giving up.  `where` names the failing day in the error.
inline Mat spd_inverse(const Mat& m, const std::string& where) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) {
        Mat jittered = m + 1e-10 * Mat::Identity(m.rows(), m.cols());
        llt.compute(jittered);
        if (llt.info() != Eigen::Success)
            throw numeric_error(where + ": covariance not positive definite");
    }
    return llt.solve(Mat::Identity(m.rows(), m.cols()));
}

}  // namespace posterior_detail

// One nightly update.  Unavailable observations are skipped; an empty
// effective batch advances the day and leaves the posterior untouched.
// With data, the conjugate Gaussian update runs in precision form:
//   Sigma_d = (Sigma_{d-1}^{-1} + (1/s2) sum phi phi')^{-1}
//   mu_d    = Sigma_d (Sigma_{d-1}^{-1} mu_{d-1} + (1/s2) sum phi R).
// The noise variance s2 comes from the prior.  The returned covariance is
// symmetrized; asymmetry beyond 1e-12 before enforcement is a failure.
inline PosteriorState posterior_update(const PosteriorState& state, const Prior& prior,
                                       const std::vector<DayObservation>& day_batch) {
    const int n = static_cast<int>(state.mu.size());
    const std::string where = "posterior_update day " + std::to_string(state.day + 1);
    if (state.sigma.rows() != n || state.sigma.cols() != n)
        throw data_error(where + ": state dimension mismatch");
    const double s2 = prior.noise_var;
    if (!(s2 > 0.0) || !std::isfinite(s2))
        throw data_error(where + ": noise variance must be positive");

    Mat info = Mat::Zero(n, n);
    Vec lead = Vec::Zero(n);
    int used = 0;
    for (const DayObservation& obs : day_batch) {
        if (!obs.available) continue;
        if (obs.phi.size() != n)
            throw data_error(where + ": phi dimension mismatch");
        if (!obs.phi.allFinite())
            throw data_error(where + ": phi has non-finite entries");
        if (!std::isfinite(obs.reward))
            throw data_error(where + ": reward is not finite");
        info.noalias() += obs.phi * obs.phi.transpose();
        lead.noalias() += obs.phi * obs.reward;
        ++used;
    }

    PosteriorState next;
    next.day = state.day + 1;
    next.eta = state.eta;
    if (used == 0) {
        next.mu = state.mu;
        next.sigma = state.sigma;
        return next;
    }

    const Mat precision_prev = posterior_detail::spd_inverse(state.sigma, where);
    Mat precision = precision_prev + info / s2;
    precision = 0.5 * (precision + precision.transpose());
    Mat sigma = posterior_detail::spd_inverse(precision, where);
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    if (!(asym < 1e-12))
        throw numeric_error(where + ": posterior covariance asymmetry " +
                            std::to_string(asym));
    next.sigma = 0.5 * (sigma + sigma.transpose());
    next.mu = next.sigma * (precision_prev * state.mu + lead / s2);
    if (!next.mu.allFinite())
        throw numeric_error(where + ": posterior mean is not finite");
    if (state.eta.update_hook) next.eta.update_hook(next.eta, day_batch);
    return next;
}

// Marginal posterior over the advantage block beta (last 5 coordinates).
inline std::pair<Vec, Mat> beta_marginal(const PosteriorState& state) {
    const int n = static_cast<int>(state.mu.size());
    if (n < kDimF) throw data_error("beta_marginal: state dimension too small");
    Vec mu = state.mu.tail(kDimF);
    Mat sigma = state.sigma.bottomRightCorner(kDimF, kDimF);
    sigma = 0.5 * (sigma + sigma.transpose());
    return {std::move(mu), std::move(sigma)};
}

}  // namespace banditaudit
