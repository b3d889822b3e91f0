#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "banditaudit/normal.hpp"
#include "banditaudit/rng.hpp"
#include "banditaudit/types.hpp"

namespace banditaudit {

// One (already featurized) observation inside a nightly update batch.
struct DayObservation {
    Vec phi;          // dimension 18
    double reward = 0.0;
    bool available = false;
};

// Threshold eta(x) the forecasted advantage is compared against.  The
// deployed algorithm used a constant (default 0); `custom` allows
// dosage-dependent rules.  `update_hook`, when set, is invoked after each
// nightly posterior update with the day's batch so richer rules can adapt
// over time; the default threshold is static.
struct ThresholdPolicy {
    double constant = 0.0;
    std::function<double(double)> custom;  // dosage -> threshold
    std::function<void(ThresholdPolicy&, const std::vector<DayObservation>&)> update_hook;
};

inline double eta_evaluate(const ThresholdPolicy& eta, double dosage) {
    const double v = eta.custom ? eta.custom(dosage) : eta.constant;
    if (!std::isfinite(v)) throw numeric_error("eta_evaluate: threshold is not finite");
    return v;
}

// Standardized advantage forecast
//   delta = (mu_beta' f - eta) / sqrt(f' Sigma_beta f).
// The posterior variance of the advantage must be positive; a collapsed
// one means the posterior went degenerate upstream.
inline double standardized_advantage(const Vec& beta_mu, const Mat& beta_sigma,
                                     const Vec& f, double eta) {
    if (beta_mu.size() != f.size() || beta_sigma.rows() != f.size() ||
        beta_sigma.cols() != f.size())
        throw data_error("standardized_advantage: dimension mismatch");
    const double var = f.dot(beta_sigma * f);
    if (!(var > 1e-12))
        throw numeric_error("standardized_advantage: degenerate forecast variance " +
                            std::to_string(var));
    return (beta_mu.dot(f) - eta) / std::sqrt(var);
}

// Probability clipping h(p) = min{0.8, 0.2 + 1.6 * max{p - 0.5, 0}}.
// Piecewise linear: 0.2 below p = 0.5, rising to 0.8 at p = 0.875.
inline double clip_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw data_error("clip_probability: p outside [0, 1]");
    const double raised = 0.2 + 1.6 * (p > 0.5 ? p - 0.5 : 0.0);
    return raised < 0.8 ? raised : 0.8;
}

// Randomization probability pi = h(Phi(delta)) for a standardized
// advantage forecast delta.
inline double action_probability(double delta) {
    if (std::isnan(delta)) throw numeric_error("action_probability: delta is NaN");
    return clip_probability(normal_cdf(delta));
}

// Draw A ~ Bernoulli(prob) from the caller's stream.  prob = 0 and 1 are
// exact (never and always treat).
inline int sample_action(double prob, RngStream& stream) {
    if (!(prob >= 0.0 && prob <= 1.0))
        throw data_error("sample_action: prob outside [0, 1]");
    return stream.bernoulli(prob) ? 1 : 0;
}

}  // namespace banditaudit
