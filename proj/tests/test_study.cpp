#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "banditaudit/study.hpp"
#include "banditaudit/synth.hpp"

using namespace banditaudit;

namespace {

std::vector<Trajectory> small_cohort(uint64_t seed, int n = 5, int T = 100) {
    SynthSpec spec;
    spec.n_users = n;
    spec.T = T;
    spec.seed = seed;
    spec.true_alpha = (Vec(kDimG) << 0.5, 0.1, 0.0, 0.1, -0.02, 0.2, 0.0, 0.0).finished();
    spec.true_beta = (Vec(kDimF) << 0.3, 0.0, 0.1, -0.2, 0.4).finished();
    return generate_trial(spec);
}

StudyConfig small_config(int B = 50) {
    StudyConfig config;
    config.B = B;
    config.master_seed = 99;
    config.score.kind = ScoreKind::type1;
    config.score.smoothing = Smoothing::smoothed;
    config.score.gamma = 0.8;
    return config;
}

bool same_result(const StudyResult& a, const StudyResult& b) {
    if (a.users.size() != b.users.size()) return false;
    if (a.per_trial.size() != b.per_trial.size()) return false;
    for (size_t b_ = 0; b_ < a.per_trial.size(); ++b_) {
        if (a.per_trial[b_].numint != b.per_trial[b_].numint) return false;
        if (a.per_trial[b_].numint_plus != b.per_trial[b_].numint_plus) return false;
        if (a.per_trial[b_].numint_minus != b.per_trial[b_].numint_minus)
            return false;
    }
    for (size_t i = 0; i < a.users.size(); ++i) {
        const UserStudy& ua = a.users[i];
        const UserStudy& ub = b.users[i];
        if (ua.user_id != ub.user_id) return false;
        if (ua.lval != ub.lval) return false;
        if (ua.usable_resamples != ub.usable_resamples) return false;
        for (size_t k = 0; k < ua.resample_score.size(); ++k) {
            const bool nan_a = std::isnan(ua.resample_score[k]);
            const bool nan_b = std::isnan(ub.resample_score[k]);
            if (nan_a != nan_b) return false;
            if (!nan_a && ua.resample_score[k] != ub.resample_score[k]) return false;
        }
    }
    return a.count_percentile == b.count_percentile &&
           a.observed.numint == b.observed.numint;
}

}  // namespace

TEST_CASE("count_percentile is the non-strict trial fraction", "[study]") {
    CHECK(count_percentile(3, {1, 3, 5, 3}) == Catch::Approx(0.75));
    CHECK(count_percentile(0, {0}) == Catch::Approx(1.0));
    CHECK(count_percentile(6, {1, 3, 5, 3}) == Catch::Approx(0.0));
    CHECK(count_percentile(-1, {1, 3, 5, 3}) == Catch::Approx(1.0));
    CHECK_THROWS_AS(count_percentile(0, {}), data_error);
}

TEST_CASE("user_lval compares distances from one half, non-strictly", "[study]") {
    const std::vector<double> resampled = {0.5, 0.95, 0.1, 0.9};
    const std::vector<uint8_t> usable = {1, 1, 1, 1};
    CHECK(user_lval(0.9, resampled, usable) == Catch::Approx(0.75));
    CHECK(user_lval(0.5, resampled, usable) == Catch::Approx(1.0));
    CHECK(user_lval(1.0, resampled, usable) == Catch::Approx(0.0));
    // Ineligible resamples are skipped.
    CHECK(user_lval(0.9, resampled, {0, 1, 0, 1}) == Catch::Approx(1.0));
    CHECK_THROWS_AS(user_lval(0.9, resampled, {0, 0, 0, 0}), model_error);
}

TEST_CASE("a user whose rewards cannot be fit is excluded, not fatal", "[study]") {
    // One fully unavailable user: the reward fit has nothing to use.
    Trajectory idle;
    idle.user_id = "idle";
    for (int t = 1; t <= 50; ++t) {
        DecisionPoint p;
        p.t = t;
        p.day = day_of(t);
        p.available = false;
        idle.points.push_back(p);
    }
    idle.posterior_update_log.assign(10, 0);

    StudyConfig config = small_config(1);
    const StudyResult result = run_study({idle}, config);
    REQUIRE(result.excluded.size() == 1);
    CHECK(result.excluded[0].first == "idle");
    CHECK(result.users.empty());
    REQUIRE(result.per_trial.size() == 1);
    CHECK(result.per_trial[0].numint == 0);
    CHECK(result.observed.numint == 0);
    CHECK(result.count_percentile == Catch::Approx(1.0));
    CHECK(result.rng_streams_created == 0);
}

TEST_CASE("studies are deterministic and scheduling-independent", "[study]") {
    const std::vector<Trajectory> cohort = small_cohort(70);
    StudyConfig config = small_config(50);

    const StudyResult serial = run_study(cohort, config);
    const StudyResult again = run_study(cohort, config);
    CHECK(same_result(serial, again));

    config.worker_count = 4;
    const StudyResult parallel = run_study(cohort, config);
    CHECK(same_result(serial, parallel));

    // One stream per (user, resample), no sharing.
    CHECK(serial.rng_streams_created ==
          static_cast<uint64_t>(cohort.size()) * 50u);
    CHECK(parallel.rng_streams_created == serial.rng_streams_created);
}

TEST_CASE("a different master seed moves the resample scores", "[study]") {
    const std::vector<Trajectory> cohort = small_cohort(71, 2);
    StudyConfig config = small_config(20);
    const StudyResult a = run_study(cohort, config);
    config.master_seed = 100;
    const StudyResult b = run_study(cohort, config);
    REQUIRE(a.users.size() == b.users.size());
    bool any_diff = false;
    for (size_t i = 0; i < a.users.size(); ++i) {
        // Observed side is seed-independent.
        CHECK(a.users[i].observed.score == b.users[i].observed.score);
        for (size_t k = 0; k < a.users[i].resample_score.size(); ++k) {
            const double xa = a.users[i].resample_score[k];
            const double xb = b.users[i].resample_score[k];
            if (std::isnan(xa) != std::isnan(xb) || (!std::isnan(xa) && xa != xb))
                any_diff = true;
        }
    }
    CHECK(any_diff);
}

TEST_CASE("per-trial counts decompose and match a manual recount", "[study]") {
    const std::vector<Trajectory> cohort = small_cohort(72);
    StudyConfig config = small_config(30);
    const StudyResult result = run_study(cohort, config);

    for (size_t b = 0; b < result.per_trial.size(); ++b) {
        const TrialCounts& c = result.per_trial[b];
        CHECK(c.numint == c.numint_plus + c.numint_minus);
        int manual = 0, manual_plus = 0;
        for (const UserStudy& us : result.users) {
            if (!us.resample_eligible[b]) continue;
            const double s = us.resample_score[b];
            if (s - 0.5 >= config.score.delta) {
                ++manual;
                ++manual_plus;
            } else if (0.5 - s >= config.score.delta) {
                ++manual;
            }
        }
        CHECK(c.numint == manual);
        CHECK(c.numint_plus == manual_plus);
    }
    CHECK(result.observed.numint ==
          result.observed.numint_plus + result.observed.numint_minus);

    // The headline percentile is the count_percentile of the stored counts.
    std::vector<int> counts;
    for (const TrialCounts& c : result.per_trial) counts.push_back(c.numint);
    CHECK(result.count_percentile ==
          Catch::Approx(count_percentile(result.observed.numint, counts)));
}

TEST_CASE("eligibility never flips across resamples of the same user", "[study]") {
    // Good days are a function of the frozen exogenous structure alone, so
    // every resample of a user shares the user's eligibility.
    const std::vector<Trajectory> cohort = small_cohort(73);
    StudyConfig config = small_config(30);
    const StudyResult result = run_study(cohort, config);
    CHECK(result.eligibility_flips == 0);
    for (const UserStudy& us : result.users) {
        if (!us.observed.eligible) continue;
        CHECK(us.usable_resamples == static_cast<int>(us.resample_score.size()));
        REQUIRE(us.lval.has_value());
        CHECK(*us.lval >= 0.0);
        CHECK(*us.lval <= 1.0);
    }
}

TEST_CASE("a single-cell stability grid reproduces the main computation",
          "[study]") {
    const std::vector<Trajectory> cohort = small_cohort(74);
    StudyConfig config = small_config(25);
    config.delta_grid = {config.score.delta};
    config.gamma_grid = {config.score.gamma};
    const StudyResult result = run_study(cohort, config);
    REQUIRE(result.grid.size() == 1);
    const GridCell& cell = result.grid[0];
    CHECK(cell.observed.numint == result.observed.numint);
    CHECK(cell.observed.numint_plus == result.observed.numint_plus);
    CHECK(cell.fraction == result.count_percentile);
    CHECK(cell.fraction_plus == result.count_percentile_plus);
    CHECK(cell.fraction_minus == result.count_percentile_minus);
}

TEST_CASE("the stability grid re-scores stored slots without re-simulation",
          "[study]") {
    const std::vector<Trajectory> cohort = small_cohort(75);
    StudyConfig config = small_config(25);
    config.delta_grid = {0.35, 0.45};
    config.gamma_grid = {0.6, 0.8};
    const StudyResult result = run_study(cohort, config);
    REQUIRE(result.grid.size() == 4);
    // Simulation count is unchanged by the grid.
    CHECK(result.rng_streams_created ==
          static_cast<uint64_t>(cohort.size()) * 25u);

    for (const GridCell& cell : result.grid) {
        // Recount the cell from the per-user stored scores.
        std::vector<int> trial(25, 0);
        int observed = 0;
        for (const UserStudy& us : result.users) {
            const bool obs_elig = us.observed.good_fraction >= 1.0 - cell.gamma;
            if (obs_elig && !std::isnan(us.observed.score) &&
                (us.observed.score - 0.5 >= cell.delta ||
                 0.5 - us.observed.score >= cell.delta))
                ++observed;
            for (size_t b = 0; b < 25; ++b) {
                const bool elig = us.resample_good_fraction[b] >= 1.0 - cell.gamma;
                const double s = us.resample_score[b];
                if (elig && !std::isnan(s) &&
                    (s - 0.5 >= cell.delta || 0.5 - s >= cell.delta))
                    ++trial[b];
            }
        }
        CHECK(cell.observed.numint == observed);
        CHECK(cell.fraction == Catch::Approx(count_percentile(observed, trial)));
    }

    SECTION("mismatched grid axes are rejected") {
        config.gamma_grid.clear();
        CHECK_THROWS_AS(run_study(cohort, config), data_error);
    }
}

TEST_CASE("raw-score studies ignore gamma everywhere", "[study]") {
    const std::vector<Trajectory> cohort = small_cohort(76, 3);
    StudyConfig config = small_config(20);
    config.score.smoothing = Smoothing::raw;
    config.delta_grid = {0.4, 0.4};
    config.gamma_grid = {0.1, 0.9};
    const StudyResult result = run_study(cohort, config);
    REQUIRE(result.grid.size() == 4);
    // With raw scoring, gamma cells differ only by their label.
    CHECK(result.grid[0].fraction == result.grid[1].fraction);
    CHECK(result.grid[2].fraction == result.grid[3].fraction);
    for (const UserStudy& us : result.users) {
        CHECK(us.observed.eligible);
        CHECK(us.usable_resamples == 20);
    }
}

TEST_CASE("precomputed fits shortcut the per-user fit", "[study]") {
    const std::vector<Trajectory> cohort = small_cohort(77, 2);
    StudyConfig config = small_config(10);
    const StudyResult fitted = run_study(cohort, config);

    std::map<std::string, FittedRewardModel> fits;
    for (const UserStudy& us : fitted.users) fits[us.user_id] = us.fit;
    const StudyResult reused = run_study(cohort, config, &fits);
    CHECK(same_result(fitted, reused));

    // A doctored fit changes the ground truth, hence the scores.
    fits[cohort[0].user_id].alpha.array() += 5.0;
    fits[cohort[0].user_id].noise_var = 0.5;
    const StudyResult doctored = run_study(cohort, config, &fits);
    CHECK(!same_result(fitted, doctored));
}
