#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "banditaudit/trajectory.hpp"

namespace banditaudit::io {

// Shortest decimal that round-trips the double (integers print bare).
inline std::string fmt_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// Linear standardization applied to the continuous context features at
// ingestion: stored value = (raw - shift) / scale.
struct Standardize {
    struct Linear {
        double shift = 0.0;
        double scale = 1.0;
    };
    Linear temperature;
    Linear prior30;
    Linear yesterday;

    void validate() const {
        for (const Linear* l : {&temperature, &prior30, &yesterday}) {
            if (!std::isfinite(l->shift) || !std::isfinite(l->scale) ||
                l->scale == 0.0)
                throw data_error("standardize: shift must be finite, scale nonzero");
        }
    }
};

namespace csv_detail {

// Canonical column order of the trajectory file.
inline const std::vector<std::string>& columns() {
    static const std::vector<std::string> cols = {
        "user_id", "t",       "day",     "available",   "engagement", "variation",
        "location", "temperature", "prior30", "yesterday", "antised",  "dosage",
        "action",  "prob",    "reward",  "missing"};
    return cols;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

struct Diagnostics {
    std::vector<std::string> messages;

    void add(size_t line, const std::string& what) {
        messages.push_back("line " + std::to_string(line) + ": " + what);
    }
    void add(const std::string& what) { messages.push_back(what); }

    void raise_if_any(const std::string& where) const {
        if (messages.empty()) return;
        std::string joined = where + ": " + std::to_string(messages.size()) +
                             " problem(s)";
        for (const std::string& m : messages) joined += "\n  " + m;
        throw data_error(joined);
    }
};

inline std::optional<double> parse_double(const std::string& cell, size_t line,
                                          const std::string& col, Diagnostics& diag) {
    if (cell.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end) {
        diag.add(line, "column '" + col + "': cannot parse number '" + cell + "'");
        return std::nullopt;
    }
    return value;
}

inline std::optional<int> parse_binary(const std::string& cell, size_t line,
                                       const std::string& col, Diagnostics& diag) {
    if (cell.empty()) return std::nullopt;
    if (cell == "0") return 0;
    if (cell == "1") return 1;
    diag.add(line, "column '" + col + "': expected 0 or 1, got '" + cell + "'");
    return std::nullopt;
}

struct RawRow {
    size_t line = 0;
    int t = 0;
    std::optional<int> day;
    DecisionPoint point;
    std::optional<double> given_dosage;
};

// Dosage handling for one completed user: the column is authoritative only
// as the t = 1 seed (dosage carried in from before the log); everything
// after must match the recursion within 1e-6 and is stored recomputed.
inline void settle_dosages(std::vector<RawRow>& rows, bool column_present,
                           Diagnostics& diag) {
    double dosage = 0.0;
    if (column_present && !rows.empty() && rows.front().given_dosage)
        dosage = *rows.front().given_dosage;
    for (size_t i = 0; i < rows.size(); ++i) {
        RawRow& row = rows[i];
        if (i > 0) {
            const DecisionPoint& prev = rows[i - 1].point;
            dosage = update_dosage(dosage, prev.action.value_or(0),
                                   prev.anti_sedentary);
            if (row.given_dosage &&
                std::abs(*row.given_dosage - dosage) > 1e-6)
                diag.add(row.line, "dosage " + fmt_double(*row.given_dosage) +
                                       " does not follow the recursion (expected " +
                                       fmt_double(dosage) + ")");
        }
        row.point.dosage = dosage;
    }
}

inline Trajectory finish_user(const std::string& user_id, std::vector<RawRow>& rows,
                              bool dosage_column, Diagnostics& diag) {
    settle_dosages(rows, dosage_column, diag);
    Trajectory traj;
    traj.user_id = user_id;
    traj.points.reserve(rows.size());
    for (RawRow& row : rows) traj.points.push_back(std::move(row.point));
    const int T = static_cast<int>(traj.points.size());
    const int D = T == 0 ? 0 : day_of(T);
    traj.posterior_update_log.assign(static_cast<size_t>(D), 0);
    for (int d = 1; d <= D; ++d) {
        if (kPointsPerDay * d > T) break;  // short final day never updates
        bool any_available = false;
        for (int t = kPointsPerDay * (d - 1) + 1; t <= kPointsPerDay * d; ++t)
            if (traj.points[static_cast<size_t>(t - 1)].available)
                any_available = true;
        if (any_available) traj.posterior_update_log[static_cast<size_t>(d - 1)] = 1;
    }
    try {
        traj.validate();
    } catch (const error& e) {
        diag.add(std::string("user ") + user_id + ": " + e.what());
    }
    return traj;
}

}  // namespace csv_detail

// Strict trajectory-file reader.  Lines starting with '#' are comments.
// Every malformed cell/row/user produces a located diagnostic; when any
// were collected the whole read fails with all of them listed.
inline std::vector<Trajectory> read_trajectories(std::istream& in,
                                                 const Standardize& standardize = {}) {
    using namespace csv_detail;
    standardize.validate();
    Diagnostics diag;

    std::string line;
    size_t line_no = 0;

    // Header.
    std::map<std::string, size_t> col;
    bool has_dosage = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto names = split_line(line);
        for (size_t i = 0; i < names.size(); ++i) {
            bool known = false;
            for (const std::string& want : columns())
                if (names[i] == want) known = true;
            if (!known)
                diag.add(line_no, "unknown column '" + names[i] + "'");
            else if (col.count(names[i]))
                diag.add(line_no, "duplicate column '" + names[i] + "'");
            else
                col[names[i]] = i;
        }
        for (const std::string& want : columns()) {
            if (want == "dosage") continue;  // optional, recomputed if absent
            if (!col.count(want)) diag.add(line_no, "missing column '" + want + "'");
        }
        has_dosage = col.count("dosage") > 0;
        break;
    }
    if (col.empty()) diag.add("no header row found");
    diag.raise_if_any("trajectory file");

    const size_t n_cols = col.size();
    std::vector<Trajectory> out;
    std::map<std::string, bool> finished_users;
    std::string current_user;
    std::vector<RawRow> rows;

    auto flush_user = [&]() {
        if (current_user.empty()) return;
        out.push_back(finish_user(current_user, rows, has_dosage, diag));
        finished_users[current_user] = true;
        rows.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_line(line);
        if (cells.size() != n_cols) {
            diag.add(line_no, "expected " + std::to_string(n_cols) + " cells, got " +
                                  std::to_string(cells.size()));
            continue;
        }
        auto cell = [&](const char* name) -> const std::string& {
            return cells[col.at(name)];
        };

        const std::string& user = cell("user_id");
        if (user.empty()) {
            diag.add(line_no, "empty user_id");
            continue;
        }
        if (user != current_user) {
            if (finished_users.count(user)) {
                diag.add(line_no, "rows of user '" + user + "' are not consecutive");
                continue;
            }
            flush_user();
            current_user = user;
        }

        RawRow row;
        row.line = line_no;
        DecisionPoint& p = row.point;

        const auto t_val = parse_double(cell("t"), line_no, "t", diag);
        if (!t_val || *t_val < 1 || *t_val != std::floor(*t_val)) {
            if (t_val) diag.add(line_no, "t must be a positive integer");
            continue;
        }
        p.t = static_cast<int>(*t_val);
        const auto day_val = parse_double(cell("day"), line_no, "day", diag);
        if (day_val) {
            p.day = static_cast<int>(*day_val);
            if (p.day != day_of(p.t))
                diag.add(line_no, "day " + cell("day") + " is not ceil(t/5) for t=" +
                                      cell("t"));
        } else {
            p.day = day_of(p.t);
        }

        const auto avail = parse_binary(cell("available"), line_no, "available", diag);
        if (!avail) {
            diag.add(line_no, "available is required");
            continue;
        }
        p.available = *avail == 1;

        auto binary_feature = [&](const char* name, double& slot) {
            const auto v = parse_binary(cell(name), line_no, name, diag);
            if (v)
                slot = static_cast<double>(*v);
            else
                diag.add(line_no, std::string(name) + " is required");
        };
        binary_feature("engagement", p.context.engagement);
        binary_feature("variation", p.context.variation);
        binary_feature("location", p.context.location);

        auto continuous = [&](const char* name, double& slot,
                              const Standardize::Linear& lin) {
            const auto v = parse_double(cell(name), line_no, name, diag);
            if (v)
                slot = (*v - lin.shift) / lin.scale;
            else
                diag.add(line_no, std::string(name) + " is required");
        };
        continuous("temperature", p.context.temperature, standardize.temperature);
        continuous("prior30", p.context.prior_30min_steps, standardize.prior30);
        continuous("yesterday", p.context.yesterday_steps, standardize.yesterday);

        const auto antised = parse_binary(cell("antised"), line_no, "antised", diag);
        if (antised)
            p.anti_sedentary = *antised;
        else
            diag.add(line_no, "antised is required");

        if (has_dosage)
            row.given_dosage = parse_double(cell("dosage"), line_no, "dosage", diag);
        const auto action = parse_binary(cell("action"), line_no, "action", diag);
        if (action) p.action = *action;
        const auto prob = parse_double(cell("prob"), line_no, "prob", diag);
        if (prob) p.action_prob = *prob;
        const auto reward = parse_double(cell("reward"), line_no, "reward", diag);
        if (reward) p.reward = *reward;
        const auto missing = parse_binary(cell("missing"), line_no, "missing", diag);
        p.missing = missing.value_or(0) == 1;
        if (p.missing && p.reward)
            diag.add(line_no, "row marked missing but carries a reward");

        rows.push_back(std::move(row));
    }
    flush_user();
    if (out.empty()) diag.add("no data rows");
    diag.raise_if_any("trajectory file");
    return out;
}

inline std::vector<Trajectory> read_trajectories_file(const std::string& path,
                                                      const Standardize& standardize = {}) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open trajectory file: " + path);
    try {
        return read_trajectories(in, standardize);
    } catch (const data_error& e) {
        throw data_error(path + ": " + e.what());
    }
}

// Canonical-order writer; `comments` are emitted first, one '# ' line each.
inline void write_trajectories(std::ostream& out, const std::vector<Trajectory>& users,
                               const std::vector<std::string>& comments = {}) {
    using namespace csv_detail;
    for (const std::string& c : comments) out << "# " << c << "\n";
    for (size_t i = 0; i < columns().size(); ++i)
        out << (i ? "," : "") << columns()[i];
    out << "\n";
    for (const Trajectory& traj : users) {
        for (const DecisionPoint& p : traj.points) {
            out << traj.user_id << ',' << p.t << ',' << p.day << ','
                << (p.available ? 1 : 0) << ',' << fmt_double(p.context.engagement)
                << ',' << fmt_double(p.context.variation) << ','
                << fmt_double(p.context.location) << ','
                << fmt_double(p.context.temperature) << ','
                << fmt_double(p.context.prior_30min_steps) << ','
                << fmt_double(p.context.yesterday_steps) << ',' << p.anti_sedentary
                << ',' << fmt_double(p.dosage) << ',';
            if (p.action) out << *p.action;
            out << ',';
            if (p.action_prob) out << fmt_double(*p.action_prob);
            out << ',';
            if (p.reward) out << fmt_double(*p.reward);
            out << ',' << (p.missing ? 1 : 0) << "\n";
        }
    }
}

inline void write_trajectories_file(const std::string& path,
                                    const std::vector<Trajectory>& users,
                                    const std::vector<std::string>& comments = {}) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open for writing: " + path);
    write_trajectories(out, users, comments);
    if (!out) throw error("write failed: " + path);
}

}  // namespace banditaudit::io
