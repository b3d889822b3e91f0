#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "banditaudit/interest.hpp"
#include "banditaudit/replay.hpp"

namespace banditaudit {

enum class GroundTruthKind { null_advantage, null_feature };

// How the rerun algorithm is configured: prior, threshold policy, warmup,
// and optionally a fixed noise variance (otherwise it is estimated per
// user from the reward-model fit).
struct AlgorithmConfig {
    Prior prior;
    ThresholdPolicy eta0;
    int warmup_days = kDefaultWarmupDays;
    double warmup_prob = kDefaultWarmupProb;
    std::optional<double> noise_var;

    AlgorithmConfig() : prior(make_default_prior()) {}
};

struct StudyConfig {
    GroundTruthKind ground_truth_kind = GroundTruthKind::null_advantage;
    FVar ground_truth_feature = FVar::variation;  // for null_feature
    int B = 500;
    uint64_t master_seed = 0;
    ScoreConfig score;
    std::vector<double> delta_grid;  // both nonempty => stability grid
    std::vector<double> gamma_grid;
    int worker_count = 1;
    AlgorithmConfig algorithm;

    void validate() const {
        if (B < 1) throw data_error("study config: B must be >= 1");
        if (worker_count < 1) throw data_error("study config: worker_count must be >= 1");
        score.validate();
        algorithm.prior.validate();
        if (algorithm.noise_var && !(*algorithm.noise_var > 0.0))
            throw data_error("study config: noise_var must be positive");
        if (delta_grid.empty() != gamma_grid.empty())
            throw data_error("study config: delta and gamma grids go together");
        for (double d : delta_grid)
            if (!(d > 0.0 && d < 0.5))
                throw data_error("study config: grid delta must be in (0, 0.5)");
        for (double g : gamma_grid)
            if (!(g > 0.0 && g < 1.0))
                throw data_error("study config: grid gamma must be in (0, 1)");
    }
};

struct TrialCounts {
    int numint = 0;
    int numint_plus = 0;
    int numint_minus = 0;
};

struct GridCell {
    double delta = 0.0;
    double gamma = 0.0;
    TrialCounts observed;
    double fraction = 0.0;        // count-percentile of numint at this cell
    double fraction_plus = 0.0;
    double fraction_minus = 0.0;
};

// Per-user study record: the observed score, all resampled scores, and the
// chance-calibration fraction lval.
struct UserStudy {
    std::string user_id;
    FittedRewardModel fit;
    ScoreResult observed;
    std::vector<double> resample_score;       // length B, NaN where ineligible
    std::vector<uint8_t> resample_eligible;   // length B
    std::vector<double> resample_good_fraction;  // length B
    std::optional<double> lval;               // absent if observed ineligible
    int usable_resamples = 0;
};

struct StudyResult {
    std::vector<UserStudy> users;  // included users, input order
    std::vector<std::pair<std::string, std::string>> excluded;  // (user, reason)
    std::vector<TrialCounts> per_trial;  // length B
    TrialCounts observed;
    double count_percentile = 1.0;
    double count_percentile_plus = 1.0;
    double count_percentile_minus = 1.0;
    std::vector<GridCell> grid;
    // Resamples whose eligibility differed from the user's observed
    // eligibility.  Eligibility depends only on exogenous structure, so
    // this should be 0; recorded rather than assumed.
    int eligibility_flips = 0;
    uint64_t rng_streams_created = 0;
};

// Count-percentile of an observed count within trial counts:
// (1/B) sum_b 1(observed <= trial_b).  Non-strict by definition.
inline double count_percentile(int observed, const std::vector<int>& trial_counts) {
    if (trial_counts.empty()) throw data_error("count_percentile: no trials");
    int le = 0;
    for (int c : trial_counts)
        if (observed <= c) ++le;
    return static_cast<double>(le) / static_cast<double>(trial_counts.size());
}

// Chance-calibration fraction of one user: the fraction of usable
// resamples whose score is at least as extreme (distance from 0.5) as the
// observed score.  Non-strict comparison.
inline double user_lval(double observed_score, const std::vector<double>& resampled,
                        const std::vector<uint8_t>& usable,
                        const std::string& user_id = {}) {
    if (resampled.size() != usable.size())
        throw data_error("user_lval: mask length mismatch");
    const double obs_ext = std::abs(observed_score - 0.5);
    int n = 0, hits = 0;
    for (size_t b = 0; b < resampled.size(); ++b) {
        if (!usable[b]) continue;
        ++n;
        if (obs_ext <= std::abs(resampled[b] - 0.5)) ++hits;
    }
    if (n == 0)
        throw model_error("user_lval: zero usable resamples for user " + user_id);
    return static_cast<double>(hits) / n;
}

namespace study_detail {

struct ClassifyOutcome {
    bool counted = false;
    bool plus = false;
};

// Classification of a stored (score, good_fraction) pair at an arbitrary
// (delta, gamma) cell; shared by the main counts and the stability grid so
// a size-one grid is exactly the main computation.
inline ClassifyOutcome classify_stored(double score, double good_fraction, bool raw_mode,
                                       double delta, double gamma) {
    const bool eligible = raw_mode || good_fraction >= 1.0 - gamma;
    if (!eligible || std::isnan(score)) return {};
    ClassifyOutcome out;
    // Distance-from-one-half form, matching `classify`.
    out.plus = score - 0.5 >= delta;
    out.counted = out.plus || 0.5 - score >= delta;
    return out;
}

}  // namespace study_detail

// Run the full audit: per user, fit the working reward model, freeze the
// configured null ground truth, rerun the algorithm B times on streams
// keyed (master_seed, user, b), and score everything.  Per-user fit
// failures are recorded and excluded, not fatal.  The result is a pure
// function of (users, config): (user, b) work units are scattered over
// `worker_count` threads into preallocated slots, and all aggregation
// happens after the join.
//
// `precomputed_fits`, when supplied (e.g. from a coefficients file), is
// used instead of refitting; users absent from the map are fitted here.
inline StudyResult run_study(
    const std::vector<Trajectory>& users, const StudyConfig& config,
    const std::map<std::string, FittedRewardModel>* precomputed_fits = nullptr) {
    config.validate();
    const AlgorithmConfig& algo = config.algorithm;

    struct Prepared {
        const Trajectory* traj = nullptr;
        FittedRewardModel fit;
        GroundTruthModel ground_truth;
        ScoreResult observed;
    };

    StudyResult result;
    std::vector<Prepared> prepared;
    prepared.reserve(users.size());

    for (const Trajectory& traj : users) {
        try {
            traj.validate();
            Prepared p;
            p.traj = &traj;
            if (precomputed_fits && precomputed_fits->count(traj.user_id)) {
                p.fit = precomputed_fits->at(traj.user_id);
            } else if (algo.noise_var) {
                Prior fit_prior = algo.prior;
                fit_prior.noise_var = *algo.noise_var;
                p.fit = fit_reward_model(traj, fit_prior);
            } else {
                p.fit = fit_with_estimated_noise(traj, algo.prior);
            }
            p.ground_truth =
                (config.ground_truth_kind == GroundTruthKind::null_advantage)
                    ? make_null_advantage_model(traj, p.fit, algo.prior)
                    : make_null_feature_model(traj, p.fit, algo.prior,
                                              config.ground_truth_feature);
            p.ground_truth.eta0 = algo.eta0;
            p.ground_truth.warmup_days = algo.warmup_days;
            p.ground_truth.warmup_prob = algo.warmup_prob;
            p.ground_truth.validate();

            Prior replay_prior = algo.prior;
            replay_prior.noise_var = p.fit.noise_var;
            const ForecastStream observed_stream = reconstruct_forecasts(
                traj, replay_prior, algo.eta0, algo.warmup_days, algo.warmup_prob);
            p.observed = score_stream(observed_stream, config.score, traj.user_id);
            prepared.push_back(std::move(p));
        } catch (const error& e) {
            result.excluded.emplace_back(traj.user_id, e.what());
        }
    }

    const size_t n = prepared.size();
    const size_t B = static_cast<size_t>(config.B);

    // Preallocated (user, b) result slots; written by exactly one worker
    // each, so output cannot depend on scheduling.
    struct Slot {
        double score = std::numeric_limits<double>::quiet_NaN();
        uint8_t eligible = 0;
        double good_fraction = 0.0;
    };
    std::vector<Slot> slots(n * B);
    std::atomic<size_t> next_item{0};
    std::atomic<uint64_t> streams_created{0};
    std::exception_ptr worker_failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        try {
            while (true) {
                const size_t item = next_item.fetch_add(1);
                if (item >= n * B) break;
                const size_t i = item / B;
                const size_t b = item % B;
                RngStream stream =
                    make_stream(config.master_seed, StreamPurpose::study_resample,
                                static_cast<uint64_t>(i) + 1,
                                static_cast<uint64_t>(b) + 1);
                streams_created.fetch_add(1, std::memory_order_relaxed);
                const ResampledTrajectory rt = resample_trajectory(
                    prepared[i].ground_truth, stream, static_cast<uint64_t>(b) + 1);
                const ScoreResult sr =
                    score_stream(rt.stream, config.score, prepared[i].traj->user_id);
                Slot& slot = slots[item];
                slot.score = sr.score;
                slot.eligible = sr.eligible ? 1 : 0;
                slot.good_fraction = sr.good_fraction;
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!worker_failure) worker_failure = std::current_exception();
        }
    };

    const size_t n_threads =
        std::min<size_t>(static_cast<size_t>(config.worker_count), std::max<size_t>(n * B, 1));
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (size_t w = 0; w < n_threads; ++w) threads.emplace_back(worker);
    for (std::thread& th : threads) th.join();
    if (worker_failure) std::rethrow_exception(worker_failure);
    result.rng_streams_created = streams_created.load();
    if (result.rng_streams_created != static_cast<uint64_t>(n * B))
        throw numeric_error("run_study: RNG stream accounting mismatch");

    // Everything below is pure re-scoring of the stored slots.
    const bool raw_mode = config.score.smoothing == Smoothing::raw;
    result.per_trial.assign(B, TrialCounts{});
    for (size_t i = 0; i < n; ++i) {
        const Prepared& p = prepared[i];
        UserStudy us;
        us.user_id = p.traj->user_id;
        us.fit = p.fit;
        us.observed = p.observed;
        us.resample_score.resize(B);
        us.resample_eligible.resize(B);
        us.resample_good_fraction.resize(B);
        for (size_t b = 0; b < B; ++b) {
            const Slot& slot = slots[i * B + b];
            us.resample_score[b] = slot.score;
            us.resample_eligible[b] = slot.eligible;
            us.resample_good_fraction[b] = slot.good_fraction;
            if ((slot.eligible != 0) != p.observed.eligible) ++result.eligibility_flips;
            const auto out = study_detail::classify_stored(
                slot.score, slot.good_fraction, raw_mode, config.score.delta,
                config.score.gamma);
            if (out.counted) {
                ++result.per_trial[b].numint;
                ++(out.plus ? result.per_trial[b].numint_plus
                            : result.per_trial[b].numint_minus);
            }
            if (slot.eligible) ++us.usable_resamples;
        }
        const auto obs = study_detail::classify_stored(
            p.observed.score, p.observed.good_fraction, raw_mode, config.score.delta,
            config.score.gamma);
        if (obs.counted) {
            ++result.observed.numint;
            ++(obs.plus ? result.observed.numint_plus : result.observed.numint_minus);
        }
        if (p.observed.eligible && us.usable_resamples > 0)
            us.lval = user_lval(p.observed.score, us.resample_score,
                                us.resample_eligible, us.user_id);
        result.users.push_back(std::move(us));
    }

    auto percentile_of = [&](auto pick) {
        std::vector<int> counts(B);
        for (size_t b = 0; b < B; ++b) counts[b] = pick(result.per_trial[b]);
        return count_percentile(pick(result.observed), counts);
    };
    result.count_percentile = percentile_of([](const TrialCounts& c) { return c.numint; });
    result.count_percentile_plus =
        percentile_of([](const TrialCounts& c) { return c.numint_plus; });
    result.count_percentile_minus =
        percentile_of([](const TrialCounts& c) { return c.numint_minus; });

    if (!config.delta_grid.empty()) {
        for (double delta : config.delta_grid) {
            for (double gamma : config.gamma_grid) {
                GridCell cell;
                cell.delta = delta;
                cell.gamma = gamma;
                std::vector<TrialCounts> trial(B);
                for (size_t i = 0; i < n; ++i) {
                    const UserStudy& us = result.users[i];
                    const auto obs = study_detail::classify_stored(
                        us.observed.score, us.observed.good_fraction, raw_mode, delta,
                        gamma);
                    if (obs.counted) {
                        ++cell.observed.numint;
                        ++(obs.plus ? cell.observed.numint_plus
                                    : cell.observed.numint_minus);
                    }
                    for (size_t b = 0; b < B; ++b) {
                        const auto out = study_detail::classify_stored(
                            us.resample_score[b], us.resample_good_fraction[b],
                            raw_mode, delta, gamma);
                        if (out.counted) {
                            ++trial[b].numint;
                            ++(out.plus ? trial[b].numint_plus : trial[b].numint_minus);
                        }
                    }
                }
                auto frac = [&](auto pick) {
                    std::vector<int> counts(B);
                    for (size_t b = 0; b < B; ++b) counts[b] = pick(trial[b]);
                    return count_percentile(pick(cell.observed), counts);
                };
                cell.fraction = frac([](const TrialCounts& c) { return c.numint; });
                cell.fraction_plus =
                    frac([](const TrialCounts& c) { return c.numint_plus; });
                cell.fraction_minus =
                    frac([](const TrialCounts& c) { return c.numint_minus; });
                result.grid.push_back(cell);
            }
        }
    }
    return result;
}

}  // namespace banditaudit
