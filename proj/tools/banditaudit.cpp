// Command-line driver: resampling audit of a Thompson-sampling activity
// coach.  Subcommands cover the full pipeline: `synth` generates trial
// data with known ground truth, `fit` estimates per-user working reward
// models, `score` computes observed interestingness, and `study` reruns
// the algorithm on resampled trajectories under a null ground truth and
// quantifies how unusual the observed personalization is.
//
// Exit codes: 0 success, 1 bad input (file or configuration), 2 runtime
// failure.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "banditaudit/errors.hpp"
#include "banditaudit/interest.hpp"
#include "banditaudit/io/config.hpp"
#include "banditaudit/io/csv.hpp"
#include "banditaudit/io/outputs.hpp"
#include "banditaudit/replay.hpp"
#include "banditaudit/reward_fit.hpp"
#include "banditaudit/study.hpp"
#include "banditaudit/synth.hpp"

namespace {

using namespace banditaudit;

struct Args {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out_dir = ".";
    std::string ground_truth;
    std::optional<double> delta;
    std::optional<double> gamma;
    bool grid = false;
    std::string coefficients_path;
    std::string input_path;
};

void add_common(CLI::App* sub, Args& a) {
    sub->add_option("--config", a.config_path, "JSON configuration file");
    sub->add_option("--seed", a.seed, "master seed (overrides the config)");
    sub->add_option("--out-dir", a.out_dir, "directory for output files");
}

io::RunConfig effective_config(const Args& a) {
    io::RunConfig cfg = io::load_config(a.config_path);
    if (a.seed) cfg.master_seed = *a.seed;
    if (a.workers) {
        if (*a.workers < 1) throw data_error("--workers must be >= 1");
        cfg.workers = *a.workers;
    }
    if (!a.ground_truth.empty()) io::set_ground_truth(cfg, a.ground_truth);
    if (a.delta) cfg.score.delta = *a.delta;
    if (a.gamma) cfg.score.gamma = *a.gamma;
    if (a.grid && cfg.delta_grid.empty()) {
        cfg.delta_grid = {0.35, 0.4, 0.45};
        cfg.gamma_grid = {0.2, 0.4, 0.6};
    }
    cfg.study_config().validate();
    return cfg;
}

// Same fit policy as the study itself: supplied coefficients win, then a
// configured noise variance, then the two-pass noise estimate.
FittedRewardModel fit_user(const Trajectory& traj, const io::RunConfig& cfg,
                           const std::map<std::string, FittedRewardModel>* pre) {
    if (pre) {
        const auto it = pre->find(traj.user_id);
        if (it != pre->end()) return it->second;
    }
    if (cfg.algorithm.noise_var) {
        Prior fit_prior = cfg.algorithm.prior;
        fit_prior.noise_var = *cfg.algorithm.noise_var;
        return fit_reward_model(traj, fit_prior);
    }
    return fit_with_estimated_noise(traj, cfg.algorithm.prior);
}

ScoreResult observed_score(const Trajectory& traj, const FittedRewardModel& fit,
                           const io::RunConfig& cfg) {
    Prior replay_prior = cfg.algorithm.prior;
    replay_prior.noise_var = fit.noise_var;
    const ForecastStream stream =
        reconstruct_forecasts(traj, replay_prior, cfg.algorithm.eta0,
                              cfg.algorithm.warmup_days, cfg.algorithm.warmup_prob);
    return score_stream(stream, cfg.score, traj.user_id);
}

std::optional<std::map<std::string, FittedRewardModel>> load_fits(const Args& a) {
    if (a.coefficients_path.empty()) return std::nullopt;
    return io::read_coefficients(a.coefficients_path);
}

int cmd_synth(const Args& a) {
    const io::RunConfig cfg = effective_config(a);
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.effective_synth_seed();
    std::vector<Trajectory> users;
    std::vector<uint8_t> labels;
    if (cfg.planted_null + cfg.planted_effect > 0) {
        PlantedCohort cohort =
            planted_cohort(spec, cfg.planted_null, cfg.planted_effect,
                           cfg.planted_effect_size, cfg.planted_feature,
                           cfg.algorithm.prior);
        users = std::move(cohort.trajectories);
        labels = std::move(cohort.is_effect);
    } else {
        users = generate_trial(spec, cfg.algorithm.prior);
    }
    io::write_synth_bundle(a.out_dir, users, labels, cfg);
    long long rows = 0;
    for (const Trajectory& u : users) rows += static_cast<long long>(u.points.size());
    std::cout << "wrote " << users.size() << " user(s), " << rows
              << " decision point(s) to " << a.out_dir << "\n";
    return 0;
}

int cmd_fit(const Args& a) {
    const io::RunConfig cfg = effective_config(a);
    const std::vector<Trajectory> users =
        io::read_trajectories_file(a.input_path, cfg.standardize);
    std::vector<std::pair<std::string, FittedRewardModel>> fits;
    io::ExcludedUsers failed;
    for (const Trajectory& traj : users) {
        try {
            traj.validate();
            fits.emplace_back(traj.user_id, fit_user(traj, cfg, nullptr));
        } catch (const error& e) {
            failed.emplace_back(traj.user_id, e.what());
            std::cerr << "fit: skipping user " << traj.user_id << ": " << e.what()
                      << "\n";
        }
    }
    io::write_fit_bundle(a.out_dir, fits, failed, cfg);
    std::cout << "fitted " << fits.size() << " user(s)";
    if (!failed.empty()) std::cout << ", " << failed.size() << " failed";
    std::cout << "\n";
    return 0;
}

int cmd_score(const Args& a) {
    const io::RunConfig cfg = effective_config(a);
    const std::vector<Trajectory> users =
        io::read_trajectories_file(a.input_path, cfg.standardize);
    const auto pre = load_fits(a);
    std::vector<ScoreResult> scores;
    io::ExcludedUsers excluded;
    for (const Trajectory& traj : users) {
        try {
            traj.validate();
            const FittedRewardModel fit =
                fit_user(traj, cfg, pre ? &*pre : nullptr);
            scores.push_back(observed_score(traj, fit, cfg));
        } catch (const error& e) {
            excluded.emplace_back(traj.user_id, e.what());
            std::cerr << "score: skipping user " << traj.user_id << ": " << e.what()
                      << "\n";
        }
    }
    io::write_score_bundle(a.out_dir, scores, excluded, cfg);
    std::cout << "scored " << scores.size() << " user(s)";
    if (!excluded.empty()) std::cout << ", " << excluded.size() << " excluded";
    std::cout << "\n";
    return 0;
}

int cmd_study(const Args& a) {
    const io::RunConfig cfg = effective_config(a);
    const std::vector<Trajectory> users =
        io::read_trajectories_file(a.input_path, cfg.standardize);
    const auto pre = load_fits(a);
    const StudyResult result =
        run_study(users, cfg.study_config(), pre ? &*pre : nullptr);
    io::write_study_bundle(a.out_dir, result, cfg);
    for (const auto& [user, reason] : result.excluded)
        std::cerr << "study: excluded user " << user << ": " << reason << "\n";
    std::cout << "users=" << result.users.size()
              << " excluded=" << result.excluded.size()
              << " observed_numint=" << result.observed.numint
              << " count_percentile=" << io::fmt_double(result.count_percentile)
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "resampling audit of a Thompson-sampling just-in-time activity coach"};
    app.require_subcommand(1);

    Args synth_args, fit_args, score_args, study_args;

    CLI::App* synth = app.add_subcommand(
        "synth", "generate a synthetic trial with known ground truth");
    add_common(synth, synth_args);

    CLI::App* fit = app.add_subcommand(
        "fit", "fit per-user working reward models from logged trajectories");
    fit->add_option("input", fit_args.input_path, "trajectory CSV file")->required();
    add_common(fit, fit_args);

    CLI::App* score = app.add_subcommand(
        "score", "compute observed interestingness scores per user");
    score->add_option("input", score_args.input_path, "trajectory CSV file")
        ->required();
    add_common(score, score_args);
    score->add_option("--delta", score_args.delta,
                      "interestingness threshold, in (0, 0.5)");
    score->add_option("--gamma", score_args.gamma,
                      "eligibility slack, in (0, 1)");
    score->add_option("--coefficients", score_args.coefficients_path,
                      "coefficients.json from `fit` (skips refitting)");

    CLI::App* study = app.add_subcommand(
        "study", "rerun the algorithm on resampled trajectories under a null "
                 "ground truth and compare");
    study->add_option("input", study_args.input_path, "trajectory CSV file")
        ->required();
    add_common(study, study_args);
    study->add_option("--workers", study_args.workers,
                      "worker threads (never affects output bytes)");
    study->add_option("--ground-truth", study_args.ground_truth,
                      "null-advantage | null-feature:<feature>");
    study->add_option("--delta", study_args.delta,
                      "interestingness threshold, in (0, 0.5)");
    study->add_option("--gamma", study_args.gamma, "eligibility slack, in (0, 1)");
    study->add_flag("--grid", study_args.grid,
                    "also emit the (delta, gamma) stability grid");
    study->add_option("--coefficients", study_args.coefficients_path,
                      "coefficients.json from `fit` (skips refitting)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (fit->parsed()) return cmd_fit(fit_args);
        if (score->parsed()) return cmd_score(score_args);
        return cmd_study(study_args);
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
