#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "banditaudit/policy.hpp"
#include "banditaudit/trajectory.hpp"

namespace banditaudit {

// Posterior over the advantage block in effect during one day.
struct BetaSnapshot {
    Vec mu;     // dimension 5
    Mat sigma;  // 5 x 5
};

// Per-decision-time view of one algorithm run (observed or resampled),
// carrying exactly what interestingness scoring consumes: availability,
// missingness, context, dosage, the standardized advantage forecast, and
// the per-day posterior snapshots / nightly-update record.
//
// advantage[t-1] is set for available times (it is what the algorithm
// computed online, warmup included); scoring masks out missing times.
// day_snapshot[d-1] is the beta marginal used during day d, i.e. the state
// after the last nightly update that ran before day d.
struct ForecastStream {
    int T = 0;
    int D = 0;
    std::vector<uint8_t> available;
    std::vector<uint8_t> missing;
    std::vector<ContextFeatures> context;
    std::vector<double> dosage;
    std::vector<std::optional<double>> advantage;
    std::vector<uint8_t> update_log;        // size D
    std::vector<BetaSnapshot> day_snapshot; // size D
    ThresholdPolicy eta;                    // threshold policy in effect (static rules)

    // Effective availability for scoring: available and not missing.
    bool masked_in(int t) const {
        return available[static_cast<size_t>(t - 1)] != 0 &&
               missing[static_cast<size_t>(t - 1)] == 0;
    }

    void validate() const {
        if (T <= 0) throw data_error("forecast stream: empty");
        if (D != day_of(T)) throw data_error("forecast stream: D != ceil(T/5)");
        const auto st = static_cast<size_t>(T);
        if (available.size() != st || missing.size() != st || context.size() != st ||
            dosage.size() != st || advantage.size() != st)
            throw data_error("forecast stream: per-time arrays must have length T");
        if (update_log.size() != static_cast<size_t>(D) ||
            day_snapshot.size() != static_cast<size_t>(D))
            throw data_error("forecast stream: per-day arrays must have length D");
    }
};

}  // namespace banditaudit
