#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "banditaudit/forecast.hpp"
#include "banditaudit/policy.hpp"

namespace banditaudit {

enum class ScoreKind { type1, type2 };
enum class Smoothing { raw, smoothed };

// Scoring configuration: which interestingness score, the classification
// half-width delta, the eligibility knob gamma (a user is scored when the
// fraction of good days is >= 1 - gamma), and raw vs smoothed scoring.
struct ScoreConfig {
    ScoreKind kind = ScoreKind::type1;
    FVar feature = FVar::variation;  // type-2 target
    double delta = 0.4;
    double gamma = 0.4;
    Smoothing smoothing = Smoothing::smoothed;

    void validate() const {
        if (!(delta > 0.0 && delta < 0.5))
            throw data_error("score config: delta must be in (0, 0.5)");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw data_error("score config: gamma must be in (0, 1)");
        if (kind == ScoreKind::type2 && feature == FVar::dosage)
            throw data_error(
                "score config: type-2 scoring needs a binary feature "
                "(engagement, location or variation), not dosage");
    }
};

// Score of one user (observed or one resample).  Ineligible users carry no
// score (NaN) and no classification flags.
struct ScoreResult {
    std::string user_id;
    bool eligible = false;
    double score = std::numeric_limits<double>::quiet_NaN();
    int good_day_count = 0;
    double good_fraction = 0.0;  // good_day_count / D (1.0 for raw scores)
    bool interesting = false;
    bool interesting_plus = false;
    bool interesting_minus = false;
};

// Classification at half-width delta; boundaries are inclusive.  The
// comparisons are written in distance-from-one-half form so exact
// boundary hits (score 0.1 at delta 0.4, say) classify the way the
// real-number definition says.
inline void classify(ScoreResult& r, double delta) {
    if (!r.eligible) {
        r.interesting = r.interesting_plus = r.interesting_minus = false;
        return;
    }
    r.interesting_plus = r.score - 0.5 >= delta;
    r.interesting_minus = 0.5 - r.score >= delta;
    r.interesting = r.interesting_plus || r.interesting_minus;
}

// Raw type-1 score: fraction of masked-in decision times with a strictly
// positive advantage forecast.
inline double raw_intscore1(const std::vector<double>& advantages,
                            const std::vector<uint8_t>& mask) {
    if (advantages.size() != mask.size())
        throw data_error("raw_intscore1: mask length mismatch");
    int n = 0, wins = 0;
    for (size_t i = 0; i < advantages.size(); ++i) {
        if (!mask[i]) continue;
        ++n;
        if (advantages[i] > 0.0) ++wins;
    }
    if (n == 0) throw model_error("raw_intscore1: no masked-in decision times");
    return static_cast<double>(wins) / n;
}

namespace interest_detail {

inline double feature_value(const ContextFeatures& c, double dosage, FVar v) {
    switch (v) {
        case FVar::dosage: return dosage;
        case FVar::engagement: return c.engagement;
        case FVar::location: return c.location;
        case FVar::variation: return c.variation;
    }
    throw data_error("feature_value: unknown feature");
}

// Standardized advantage at time t with `feature` counterfactually forced
// to `value`, using the posterior snapshot of the day.
inline double toggled_advantage(const ForecastStream& fs, int t, FVar feature,
                                double value) {
    const BetaSnapshot& snap = fs.day_snapshot[static_cast<size_t>(day_of(t) - 1)];
    if (snap.mu.size() != kDimF)
        throw model_error("intscore2: missing posterior snapshot for day " +
                          std::to_string(day_of(t)));
    const ContextFeatures& c = fs.context[static_cast<size_t>(t - 1)];
    Vec f(kDimF);
    f << 1.0, fs.dosage[static_cast<size_t>(t - 1)], c.engagement, c.location,
        c.variation;
    f[fvar_index(feature)] = value;
    return standardized_advantage(
        snap.mu, snap.sigma, f,
        eta_evaluate(fs.eta, fs.dosage[static_cast<size_t>(t - 1)]));
}

}  // namespace interest_detail

// Raw type-2 score: fraction of masked-in decision times where the
// forecast with the feature toggled on strictly beats the forecast with it
// toggled off (counterfactual imputation, posterior snapshot of the day).
inline double raw_intscore2(const ForecastStream& fs, FVar feature) {
    fs.validate();
    if (feature == FVar::dosage)
        throw data_error("raw_intscore2: feature must be binary");
    int n = 0, wins = 0;
    for (int t = 1; t <= fs.T; ++t) {
        if (!fs.masked_in(t)) continue;
        ++n;
        const double on = interest_detail::toggled_advantage(fs, t, feature, 1.0);
        const double off = interest_detail::toggled_advantage(fs, t, feature, 0.0);
        if (on > off) ++wins;
    }
    if (n == 0) throw model_error("raw_intscore2: no masked-in decision times");
    return static_cast<double>(wins) / n;
}

// Sliding window of day d: day d's five decision times for type 1, days
// {d-1, d, d+1} for type 2, both clipped to [1, T].
inline std::vector<int> sliding_window(int d, ScoreKind kind, int T) {
    if (d < 1 || d > day_of(T)) throw data_error("sliding_window: day out of range");
    int lo, hi;
    if (kind == ScoreKind::type1) {
        lo = kPointsPerDay * (d - 1) + 1;
        hi = kPointsPerDay * d;
    } else {
        lo = kPointsPerDay * (d - 2) + 1;
        hi = kPointsPerDay * (d + 1);
    }
    std::vector<int> w;
    for (int t = std::max(lo, 1); t <= std::min(hi, T); ++t) w.push_back(t);
    return w;
}

// Good-day indicator.  Masked-in counts (available and not missing) are
// what feed the window means, so they are what the thresholds see.
//   type 1: >= 2 masked-in times in W_d and the nightly update ran after
//           day d-1 (never true for d = 1);
//   type 2: >= 2 masked-in times with feature on and >= 2 with feature off
//           in W_d, and an update ran on at least one of the nights after
//           days {d-1, d, d+1}.
inline bool good_day(const ForecastStream& fs, int d, ScoreKind kind,
                     FVar feature = FVar::variation) {
    const auto window = sliding_window(d, kind, fs.T);
    if (kind == ScoreKind::type1) {
        int n = 0;
        for (int t : window)
            if (fs.masked_in(t)) ++n;
        const bool fresh = d >= 2 && fs.update_log[static_cast<size_t>(d - 2)] != 0;
        return n >= 2 && fresh;
    }
    int n_on = 0, n_off = 0;
    for (int t : window) {
        if (!fs.masked_in(t)) continue;
        const ContextFeatures& c = fs.context[static_cast<size_t>(t - 1)];
        double v = 0.0;
        switch (feature) {
            case FVar::engagement: v = c.engagement; break;
            case FVar::location: v = c.location; break;
            case FVar::variation: v = c.variation; break;
            case FVar::dosage:
                throw data_error("good_day: type-2 feature must be binary");
        }
        (v == 1.0 ? n_on : n_off)++;
    }
    bool fresh = false;
    for (int x = d - 1; x <= d + 1; ++x)
        if (x >= 1 && x <= fs.D && fs.update_log[static_cast<size_t>(x - 1)] != 0)
            fresh = true;
    return n_on >= 2 && n_off >= 2 && fresh;
}

// Smoothed score.
//   type 1: fraction of good days whose availability-weighted window mean
//           advantage is strictly positive;
//   type 2: fraction of good days where the mean advantage over
//           feature-on times strictly exceeds the mean over feature-off
//           times (observed values, no counterfactual imputation).
// A user with a good-day fraction below 1 - gamma is ineligible and gets
// no score.  Ties and zeros count against (strict inequalities).
inline ScoreResult smoothed_intscore(const ForecastStream& fs, const ScoreConfig& config,
                                     const std::string& user_id = {}) {
    fs.validate();
    config.validate();
    ScoreResult result;
    result.user_id = user_id;

    int good = 0, positive = 0;
    for (int d = 1; d <= fs.D; ++d) {
        if (!good_day(fs, d, config.kind, config.feature)) continue;
        ++good;
        const auto window = sliding_window(d, config.kind, fs.T);
        if (config.kind == ScoreKind::type1) {
            double sum = 0.0;
            int n = 0;
            for (int t : window) {
                if (!fs.masked_in(t)) continue;
                sum += *fs.advantage[static_cast<size_t>(t - 1)];
                ++n;
            }
            if (n == 0)
                throw numeric_error("smoothed_intscore: good day with empty window");
            if (sum / n > 0.0) ++positive;
        } else {
            double sum_on = 0.0, sum_off = 0.0;
            int n_on = 0, n_off = 0;
            for (int t : window) {
                if (!fs.masked_in(t)) continue;
                const double v = interest_detail::feature_value(
                    fs.context[static_cast<size_t>(t - 1)],
                    fs.dosage[static_cast<size_t>(t - 1)], config.feature);
                const double a = *fs.advantage[static_cast<size_t>(t - 1)];
                if (v == 1.0) {
                    sum_on += a;
                    ++n_on;
                } else {
                    sum_off += a;
                    ++n_off;
                }
            }
            if (n_on == 0 || n_off == 0)
                throw numeric_error("smoothed_intscore: good day without diversity");
            if (sum_on / n_on > sum_off / n_off) ++positive;
        }
    }

    result.good_day_count = good;
    result.good_fraction = static_cast<double>(good) / fs.D;
    // gamma < 1 makes the threshold positive, so zero good days can never
    // pass; ineligible users keep a NaN score.
    result.eligible = result.good_fraction >= 1.0 - config.gamma;
    if (result.eligible) result.score = static_cast<double>(positive) / good;
    classify(result, config.delta);
    return result;
}

// Dispatch raw/smoothed scoring of a forecast stream.  Raw scores have no
// good-day machinery: every user with at least one masked-in time is
// scoreable (good_fraction reported as 1 so eligibility sweeps are inert).
inline ScoreResult score_stream(const ForecastStream& fs, const ScoreConfig& config,
                                const std::string& user_id = {}) {
    config.validate();
    if (config.smoothing == Smoothing::smoothed)
        return smoothed_intscore(fs, config, user_id);
    ScoreResult result;
    result.user_id = user_id;
    std::vector<double> adv(static_cast<size_t>(fs.T), 0.0);
    std::vector<uint8_t> mask(static_cast<size_t>(fs.T), 0);
    for (int t = 1; t <= fs.T; ++t) {
        if (!fs.masked_in(t)) continue;
        mask[static_cast<size_t>(t - 1)] = 1;
        adv[static_cast<size_t>(t - 1)] = *fs.advantage[static_cast<size_t>(t - 1)];
    }
    result.score = (config.kind == ScoreKind::type1)
                       ? raw_intscore1(adv, mask)
                       : raw_intscore2(fs, config.feature);
    result.eligible = true;
    result.good_day_count = 0;
    result.good_fraction = 1.0;
    classify(result, config.delta);
    return result;
}

}  // namespace banditaudit
