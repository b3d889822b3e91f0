#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "banditaudit/interest.hpp"
#include "banditaudit/io/config.hpp"
#include "banditaudit/io/csv.hpp"
#include "banditaudit/reward_fit.hpp"
#include "banditaudit/study.hpp"

namespace banditaudit::io {

namespace out_detail {

// Nearest-rank quantile: sorted ascending, rank = ceil(p * n).
inline double nearest_rank(const std::vector<double>& sorted, double p) {
    const size_t n = sorted.size();
    size_t rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

inline void csv_preamble(std::ostream& out, const RunConfig& cfg) {
    out << "# master_seed = " << cfg.master_seed << "\n";
    out << "# config_hash = " << cfg.config_hash() << "\n";
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path.string());
    return out;
}

inline std::string opt_cell(double value) {
    return std::isnan(value) ? std::string() : fmt_double(value);
}

}  // namespace out_detail

// A (user, reason) list of users a command had to leave out.
using ExcludedUsers = std::vector<std::pair<std::string, std::string>>;

namespace out_detail {

inline nlohmann::json excluded_to_json(const ExcludedUsers& excluded) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [user, reason] : excluded)
        out.push_back({{"user_id", user}, {"reason", reason}});
    return out;
}

}  // namespace out_detail

// --- coefficients.json -----------------------------------------------------

inline void write_coefficients(std::ostream& out,
                               const std::vector<std::pair<std::string, FittedRewardModel>>& fits,
                               const ExcludedUsers& failed, const RunConfig& cfg) {
    using nlohmann::json;
    json users = json::array();
    for (const auto& [user_id, fit] : fits) {
        json u;
        u["user_id"] = user_id;
        u["alpha"] = config_detail::vec_to_json(fit.alpha);
        u["beta"] = config_detail::vec_to_json(fit.beta);
        u["noise_var"] = fit.noise_var;
        u["residual_var"] = fit.residual_var;
        u["n_used"] = fit.n_used;
        users.push_back(std::move(u));
    }
    json doc;
    doc["master_seed"] = cfg.master_seed;
    doc["config_hash"] = cfg.config_hash();
    doc["users"] = std::move(users);
    doc["failed"] = out_detail::excluded_to_json(failed);
    out << doc.dump(2) << "\n";
}

inline void write_fit_bundle(const std::string& out_dir,
                             const std::vector<std::pair<std::string, FittedRewardModel>>& fits,
                             const ExcludedUsers& failed, const RunConfig& cfg) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    std::ofstream out = out_detail::open_out(dir / "coefficients.json");
    write_coefficients(out, fits, failed, cfg);
}

inline std::map<std::string, FittedRewardModel> read_coefficients(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open coefficients file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("coefficients " + path + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("users") || !doc.at("users").is_array())
        throw data_error("coefficients " + path + ": expected an object with a 'users' array");
    std::map<std::string, FittedRewardModel> out;
    for (const nlohmann::json& u : doc.at("users")) {
        if (!u.is_object() || !u.contains("user_id") || !u.at("user_id").is_string())
            throw data_error("coefficients " + path + ": user entry without user_id");
        const std::string user_id = u.at("user_id").get<std::string>();
        FittedRewardModel fit;
        const std::string where = "coefficients " + path + ": user " + user_id;
        fit.alpha = config_detail::get_fixed_vec(u, where, "alpha", kDimG, Vec());
        fit.beta = config_detail::get_fixed_vec(u, where, "beta", kDimF, Vec());
        if (fit.alpha.size() != kDimG || fit.beta.size() != kDimF)
            throw data_error(where + ": alpha and beta are required");
        fit.noise_var = config_detail::get_double(u, where, "noise_var", 0.0);
        fit.residual_var = config_detail::get_double(u, where, "residual_var", 0.0);
        fit.n_used = config_detail::get_int(u, where, "n_used", 0);
        if (!(fit.noise_var > 0.0) || !(fit.residual_var > 0.0))
            throw data_error(where + ": noise_var and residual_var must be positive");
        if (out.count(user_id))
            throw data_error(where + ": duplicate user");
        out.emplace(user_id, std::move(fit));
    }
    return out;
}

// --- scores.csv --------------------------------------------------------------

inline void write_scores(std::ostream& out, const std::vector<ScoreResult>& scores,
                         const RunConfig& cfg) {
    out_detail::csv_preamble(out, cfg);
    out << "user_id,score,eligible,good_day_count,good_fraction,"
           "interesting,interesting_plus,interesting_minus\n";
    for (const ScoreResult& s : scores) {
        out << s.user_id << ',' << out_detail::opt_cell(s.score) << ','
            << (s.eligible ? 1 : 0) << ',' << s.good_day_count << ','
            << fmt_double(s.good_fraction) << ',' << (s.interesting ? 1 : 0) << ','
            << (s.interesting_plus ? 1 : 0) << ',' << (s.interesting_minus ? 1 : 0)
            << "\n";
    }
}

inline void write_score_bundle(const std::string& out_dir,
                               const std::vector<ScoreResult>& scores,
                               const ExcludedUsers& excluded, const RunConfig& cfg) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out = out_detail::open_out(dir / "scores.csv");
        write_scores(out, scores, cfg);
    }
    nlohmann::json doc;
    doc["master_seed"] = cfg.master_seed;
    doc["config_hash"] = cfg.config_hash();
    doc["users_scored"] = scores.size();
    doc["users_excluded"] = out_detail::excluded_to_json(excluded);
    std::ofstream out = out_detail::open_out(dir / "manifest.json");
    out << doc.dump(2) << "\n";
}

// --- synthetic-trial bundle ----------------------------------------------

// trajectories.csv plus a manifest echoing the generator seed; `labels`
// (parallel to `users`) marks planted-effect users and may be empty.
inline void write_synth_bundle(const std::string& out_dir,
                               const std::vector<Trajectory>& users,
                               const std::vector<uint8_t>& labels,
                               const RunConfig& cfg) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    long long rows = 0;
    for (const Trajectory& u : users) rows += static_cast<long long>(u.points.size());
    write_trajectories_file((dir / "trajectories.csv").string(), users,
                            {"master_seed = " + std::to_string(cfg.master_seed),
                             "config_hash = " + cfg.config_hash()});
    nlohmann::json doc;
    doc["master_seed"] = cfg.master_seed;
    doc["seed"] = cfg.effective_synth_seed();
    doc["config_hash"] = cfg.config_hash();
    doc["users"] = users.size();
    doc["rows"] = rows;
    if (!labels.empty()) {
        nlohmann::json planted = nlohmann::json::array();
        for (size_t i = 0; i < users.size(); ++i)
            planted.push_back({{"user_id", users[i].user_id},
                               {"effect", labels[i] != 0}});
        doc["planted"] = std::move(planted);
    }
    doc["config"] = cfg.echo();
    std::ofstream out = out_detail::open_out(dir / "manifest.json");
    out << doc.dump(2) << "\n";
}

// --- study bundle --------------------------------------------------------

// Writes the full study bundle into `out_dir`:
//   per_trial_counts.csv   b, numint, numint_plus, numint_minus
//   per_user.csv           observed score, lval, resample-score quantiles
//   summary.json           headline counts/percentiles + config echo
//   stability_grid*.csv    only when the (delta, gamma) grid was run
//   per_resample_scores.csv  only when cfg.emit_resample_scores
// Every CSV starts with '# master_seed' / '# config_hash' comment lines so
// any file can be traced back to the run that produced it.
inline void write_study_bundle(const std::string& out_dir, const StudyResult& result,
                               const RunConfig& cfg) {
    namespace fs = std::filesystem;
    using out_detail::csv_preamble;
    using out_detail::open_out;
    const fs::path dir(out_dir);
    fs::create_directories(dir);

    {
        std::ofstream out = open_out(dir / "per_trial_counts.csv");
        csv_preamble(out, cfg);
        out << "b,numint,numint_plus,numint_minus\n";
        for (size_t b = 0; b < result.per_trial.size(); ++b) {
            const TrialCounts& c = result.per_trial[b];
            out << (b + 1) << ',' << c.numint << ',' << c.numint_plus << ','
                << c.numint_minus << "\n";
        }
    }

    {
        std::ofstream out = open_out(dir / "per_user.csv");
        csv_preamble(out, cfg);
        out << "user_id,observed_score,eligible,lval,usable_resamples,"
               "q05,q25,q50,q75,q95\n";
        for (const UserStudy& u : result.users) {
            out << u.user_id << ',' << out_detail::opt_cell(u.observed.score) << ','
                << (u.observed.eligible ? 1 : 0) << ','
                << (u.lval ? fmt_double(*u.lval) : std::string()) << ','
                << u.usable_resamples;
            std::vector<double> usable;
            for (size_t b = 0; b < u.resample_score.size(); ++b)
                if (u.resample_eligible[b]) usable.push_back(u.resample_score[b]);
            std::sort(usable.begin(), usable.end());
            for (double p : {0.05, 0.25, 0.5, 0.75, 0.95}) {
                out << ',';
                if (!usable.empty()) out << fmt_double(out_detail::nearest_rank(usable, p));
            }
            out << "\n";
        }
    }

    {
        nlohmann::json excluded = nlohmann::json::array();
        for (const auto& [user, reason] : result.excluded)
            excluded.push_back({{"user_id", user}, {"reason", reason}});
        nlohmann::json doc;
        doc["master_seed"] = cfg.master_seed;
        doc["config_hash"] = cfg.config_hash();
        doc["resamples"] = result.per_trial.size();
        doc["users_included"] = result.users.size();
        doc["users_excluded"] = std::move(excluded);
        doc["observed"] = {{"numint", result.observed.numint},
                           {"numint_plus", result.observed.numint_plus},
                           {"numint_minus", result.observed.numint_minus}};
        doc["count_percentile"] = result.count_percentile;
        doc["count_percentile_plus"] = result.count_percentile_plus;
        doc["count_percentile_minus"] = result.count_percentile_minus;
        doc["eligibility_flips"] = result.eligibility_flips;
        doc["rng_streams_created"] = result.rng_streams_created;
        doc["config"] = cfg.echo();
        std::ofstream out = open_out(dir / "summary.json");
        out << doc.dump(2) << "\n";
    }

    if (!result.grid.empty()) {
        auto write_grid = [&](const char* name, auto observed_of, auto fraction_of) {
            std::ofstream out = open_out(dir / name);
            csv_preamble(out, cfg);
            out << "delta,gamma,observed_count,fraction\n";
            for (const GridCell& cell : result.grid)
                out << fmt_double(cell.delta) << ',' << fmt_double(cell.gamma) << ','
                    << observed_of(cell) << ',' << fmt_double(fraction_of(cell)) << "\n";
        };
        write_grid(
            "stability_grid.csv", [](const GridCell& c) { return c.observed.numint; },
            [](const GridCell& c) { return c.fraction; });
        write_grid(
            "stability_grid_plus.csv",
            [](const GridCell& c) { return c.observed.numint_plus; },
            [](const GridCell& c) { return c.fraction_plus; });
        write_grid(
            "stability_grid_minus.csv",
            [](const GridCell& c) { return c.observed.numint_minus; },
            [](const GridCell& c) { return c.fraction_minus; });
    }

    if (cfg.emit_resample_scores) {
        std::ofstream out = open_out(dir / "per_resample_scores.csv");
        csv_preamble(out, cfg);
        out << "user_id,b,score,eligible\n";
        for (const UserStudy& u : result.users)
            for (size_t b = 0; b < u.resample_score.size(); ++b)
                out << u.user_id << ',' << (b + 1) << ','
                    << out_detail::opt_cell(u.resample_score[b]) << ','
                    << (u.resample_eligible[b] ? 1 : 0) << "\n";
    }
}

}  // namespace banditaudit::io
