#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "banditaudit/types.hpp"

namespace banditaudit {

// Context observed at one decision time.  Binary features must be exactly
// 0 or 1; the continuous ones are expected in standardized units (any
// shift/scale is applied at ingestion, identity by default).
struct ContextFeatures {
    double engagement = 0.0;        // binary
    double variation = 0.0;         // binary
    double location = 0.0;          // binary
    double temperature = 0.0;       // continuous
    double prior_30min_steps = 0.0; // continuous
    double yesterday_steps = 0.0;   // continuous

    void validate(const std::string& where) const {
        auto binary = [&](double v, const char* name) {
            if (!(v == 0.0 || v == 1.0))
                throw data_error(where + ": " + name + " must be 0 or 1, got " +
                                 std::to_string(v));
        };
        binary(engagement, "engagement");
        binary(variation, "variation");
        binary(location, "location");
        auto finite = [&](double v, const char* name) {
            if (!std::isfinite(v))
                throw data_error(where + ": " + name + " is not finite");
        };
        finite(temperature, "temperature");
        finite(prior_30min_steps, "prior_30min_steps");
        finite(yesterday_steps, "yesterday_steps");
    }
};

// One decision time of a trajectory.  `t` is 1-based; five decision times
// make a day.  Optional fields are absent when the deployment did not
// record them (e.g. no action at unavailable times).  `missing` marks
// times whose state/reward payload was lost; such points still carry the
// exogenous availability and anti-sedentary indicators, and the dosage
// recursion treats their action as 0.
struct DecisionPoint {
    int t = 1;
    int day = 1;  // == day_of(t)
    bool available = false;        // I_t
    ContextFeatures context;       // Z_t
    bool anti_sedentary = false;   // B_t: other-component treatment indicator
    double dosage = 0.0;           // X_t in [0, kDosageMax)
    std::optional<int> action;     // A_t in {0, 1}
    std::optional<double> action_prob;  // pi_t in [0, 1]
    std::optional<double> reward;       // R_t
    bool missing = false;
};

// A user's decision sequence, t = 1..T contiguous, plus the record of which
// nightly posterior updates ran (derived from the update-cadence guard when
// the source data does not carry it).
struct Trajectory {
    std::string user_id;
    std::vector<DecisionPoint> points;
    std::vector<uint8_t> posterior_update_log;  // size total_days(), 1 = update ran

    int total_points() const { return static_cast<int>(points.size()); }
    int total_days() const { return day_of(total_points()); }

    const DecisionPoint& at(int t) const { return points.at(static_cast<size_t>(t - 1)); }

    void validate() const {
        if (user_id.empty()) throw data_error("trajectory: empty user_id");
        if (points.empty()) throw data_error("trajectory " + user_id + ": no points");
        for (int i = 0; i < total_points(); ++i) {
            const DecisionPoint& p = points[static_cast<size_t>(i)];
            const std::string where =
                "trajectory " + user_id + ", t=" + std::to_string(i + 1);
            if (p.t != i + 1) throw data_error(where + ": t must be contiguous from 1");
            if (p.day != day_of(p.t)) throw data_error(where + ": day != ceil(t/5)");
            p.context.validate(where);
            if (!(p.dosage >= 0.0 && p.dosage <= kDosageMax))
                throw data_error(where + ": dosage outside [0, 20]");
            if (p.action && *p.action != 0 && *p.action != 1)
                throw data_error(where + ": action must be 0 or 1");
            if (!p.available && p.action && *p.action != 0)
                throw data_error(where + ": action taken while unavailable");
            if (p.action_prob && !(*p.action_prob >= 0.0 && *p.action_prob <= 1.0))
                throw data_error(where + ": action_prob outside [0, 1]");
            if (p.reward && !std::isfinite(*p.reward))
                throw data_error(where + ": reward is not finite");
        }
        if (static_cast<int>(posterior_update_log.size()) != total_days())
            throw data_error("trajectory " + user_id +
                             ": posterior_update_log must have one entry per day");
    }
};

// Baseline feature vector g(s), dimension 8:
//   (1, temperature, prior_30min_steps, yesterday_steps, dosage,
//    engagement, location, variation).
inline Vec build_g(const DecisionPoint& p) {
    p.context.validate("build_g(t=" + std::to_string(p.t) + ")");
    if (!std::isfinite(p.dosage))
        throw data_error("build_g: dosage is not finite at t=" + std::to_string(p.t));
    Vec g(kDimG);
    g << 1.0, p.context.temperature, p.context.prior_30min_steps,
        p.context.yesterday_steps, p.dosage, p.context.engagement,
        p.context.location, p.context.variation;
    return g;
}

// Advantage feature vector f(s), dimension 5:
//   (1, dosage, engagement, location, variation).
inline Vec build_f(const DecisionPoint& p) {
    p.context.validate("build_f(t=" + std::to_string(p.t) + ")");
    if (!std::isfinite(p.dosage))
        throw data_error("build_f: dosage is not finite at t=" + std::to_string(p.t));
    Vec f(kDimF);
    f << 1.0, p.dosage, p.context.engagement, p.context.location, p.context.variation;
    return f;
}

// Value of an advantage feature at a decision point (by name).
inline double fvar_value(const DecisionPoint& p, FVar v) {
    switch (v) {
        case FVar::dosage: return p.dosage;
        case FVar::engagement: return p.context.engagement;
        case FVar::location: return p.context.location;
        case FVar::variation: return p.context.variation;
    }
    throw data_error("fvar_value: unknown feature");
}

// Joint regression vector phi, dimension 18: [g; pi * f; (a - pi) * f].
// The middle block carries the action-centering probability so that the
// posterior update is the Bayesian-linear-regression one used online.
inline Vec build_phi(const DecisionPoint& p, int action, double prob) {
    if (action != 0 && action != 1)
        throw data_error("build_phi: action must be 0 or 1");
    if (!(prob >= 0.0 && prob <= 1.0))
        throw data_error("build_phi: prob outside [0, 1]");
    const Vec g = build_g(p);
    const Vec f = build_f(p);
    Vec phi(kDimTheta);
    phi.head(kDimG) = g;
    phi.segment(kDimG, kDimF) = prob * f;
    phi.tail(kDimF) = (static_cast<double>(action) - prob) * f;
    return phi;
}

// Fitting-time regression vector phi~, dimension 13: [g; a * f].
inline Vec build_phi_tilde(const DecisionPoint& p, int action) {
    if (action != 0 && action != 1)
        throw data_error("build_phi_tilde: action must be 0 or 1");
    Vec phi(kDimThetaTilde);
    phi.head(kDimG) = build_g(p);
    phi.tail(kDimF) = static_cast<double>(action) * build_f(p);
    return phi;
}

// Dosage recursion X_t = 0.95 * X_{t-1} + max(A_{t-1}, B_{t-1}).
// Stays in [0, 20) for all 0/1 action sequences when started there.
inline double update_dosage(double prev_dosage, int prev_action, int prev_antised) {
    if (!(prev_dosage >= 0.0 && prev_dosage <= kDosageMax))
        throw data_error("update_dosage: dosage outside [0, 20]");
    if ((prev_action != 0 && prev_action != 1) ||
        (prev_antised != 0 && prev_antised != 1))
        throw data_error("update_dosage: action indicators must be 0 or 1");
    return kDosageDecay * prev_dosage +
           static_cast<double>(prev_action > prev_antised ? prev_action : prev_antised);
}

}  // namespace banditaudit
