#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "banditaudit/errors.hpp"

namespace banditaudit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Decision times are grouped into days of five.
inline constexpr int kPointsPerDay = 5;

// Dosage recursion X_t = 0.95 * X_{t-1} + max(A_{t-1}, B_{t-1}).
inline constexpr double kDosageDecay = 0.95;
inline constexpr double kDosageMax = 20.0;  // = 1 / (1 - 0.95)

// Feature vector dimensions: g is the baseline vector, f the advantage
// vector, theta = (alpha0, alpha1, beta) the joint working-model parameter.
inline constexpr int kDimG = 8;
inline constexpr int kDimF = 5;
inline constexpr int kDimTheta = kDimG + 2 * kDimF;       // 18
inline constexpr int kDimThetaTilde = kDimG + kDimF;      // 13

inline int day_of(int t) { return (t + kPointsPerDay - 1) / kPointsPerDay; }

// Non-intercept coordinates of the advantage feature vector f.
enum class FVar { dosage = 1, engagement = 2, location = 3, variation = 4 };

inline int fvar_index(FVar v) { return static_cast<int>(v); }

inline const char* fvar_name(FVar v) {
    switch (v) {
        case FVar::dosage: return "dosage";
        case FVar::engagement: return "engagement";
        case FVar::location: return "location";
        case FVar::variation: return "variation";
    }
    return "?";
}

inline std::optional<FVar> fvar_from_name(const std::string& name) {
    if (name == "dosage") return FVar::dosage;
    if (name == "engagement") return FVar::engagement;
    if (name == "location") return FVar::location;
    if (name == "variation") return FVar::variation;
    return std::nullopt;
}

}  // namespace banditaudit
