#pragma once

// Permutation significance of the scaffold features, leave-one-seed-out
// ensemble validation and residual diagnostics.

#include "cydistill/dataset.hpp"
#include "cydistill/symreg.hpp"

#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace cyd {

enum class Feature { P2, Sigma3 };
std::string_view feature_name(Feature f) noexcept;

struct PermutationResult {
    Feature feature = Feature::P2;
    double baseline_r2 = 0.0;
    std::vector<double> null_r2;
    double p_value = 1.0;  // (1 + #{null >= baseline}) / (B + 1)

    double null_mean() const noexcept;
};

inline constexpr int kMinPermutations = 100;

/// Shuffles the raw feature, rebuilds the derived scaffold columns from it,
/// refits the five-term model and records in-sample R^2.
PermutationResult permutation_test(const Dataset& ds, Feature feature, int permutations = 1000,
                                   std::uint64_t seed = 0);

struct LosoFold {
    std::uint64_t left_out = 0;
    double nrmse = 0.0;  // RMSE / (max - min) of the holdout target
    double r2 = 0.0;
    double delta_r2 = 0.0;  // r2 - full-ensemble r2
};

struct LosoResult {
    std::vector<LosoFold> folds;
    double full_r2 = 0.0;
    double mean_nrmse = 0.0;
    double std_nrmse = 0.0;
    double worst_nrmse = 0.0;
    double mean_r2 = 0.0;
};

/// Needs >= 3 members; the ensemble prediction is the plain mean of the
/// selected trees.
LosoResult loso_cv(const EnsembleReport& ensemble, const Dataset& holdout);

struct QQPoint {
    double theoretical = 0.0;
    double empirical = 0.0;
};

struct ResidualDiagnostics {
    double mean = 0.0;
    double std = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    std::pair<double, double> central95{0.0, 0.0};
    std::vector<QQPoint> qq;
};

inline constexpr std::size_t kMinDiagnosticPoints = 100;

/// Weighted moments and quantiles of truth - pred; Q-Q against the normal
/// with the same mean and std at `qq_points` evenly spaced probabilities.
ResidualDiagnostics residual_diagnostics(std::span<const double> pred, std::span<const double> truth,
                                         std::span<const double> weights, std::size_t qq_points = 99);

/// Weighted quantile with linear interpolation of the cumulative weight.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q);

}  // namespace cyd
