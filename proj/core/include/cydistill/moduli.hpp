#pragma once

// Cross-moduli scan: per-psi teachers and scaffold fits, bootstrap intervals,
// linear trajectory fits, modulation labels and the error decomposition.

#include "cydistill/dataset.hpp"
#include "cydistill/formula.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cyd {

inline constexpr double kMaxScanPsi = 0.8;

/// Teacher/student error budget at one psi.
struct ErrorDecomposition {
    double teacher_sigma = 0.0;
    double student_sigma = 0.0;
    double distillation = 0.0;   // student - teacher
    double extrapolation = 0.0;  // always 0: fits are local in psi
};

/// What a provider hands the scan for one psi.
struct PsiData {
    Dataset dataset;
    double teacher_sigma = 0.0;
    std::shared_ptr<const TeacherModel> teacher;           // optional
    std::shared_ptr<const std::vector<QuinticPoint>> points;  // rows of dataset, optional
};

/// (psi, per-psi seed) -> data. Thrown NumericalError marks that psi failed.
using PsiDataProvider = std::function<PsiData(ModulusPsi, std::uint64_t)>;

struct ScanConfig {
    std::vector<double> psis{0.0, 0.2, 0.4, 0.6, 0.8};
    int k = 3;
    std::size_t n_points = 10000;
    std::uint64_t seed = 1;
    TrainingConfig training;
    int bootstrap_resamples = 0;  // 0 skips intervals, else >= 100
    double level = 0.95;

    void validate() const;
};

struct TrajectoryPoint {
    double psi = 0.0;
    bool ok = false;
    std::string error;  // diagnostic when !ok
    FiveTermCoefficients coeffs;
    double teacher_sigma = 0.0;
    std::size_t rows = 0;
    std::optional<ErrorDecomposition> budget;
};

struct CoefficientTrajectory {
    std::vector<TrajectoryPoint> points;  // strictly increasing psi

    std::vector<double> psis(bool ok_only = true) const;
    std::vector<double> column(std::size_t i, bool ok_only = true) const;
};

/// Seed of one psi job; depends only on the root seed and the psi value.
std::uint64_t psi_seed(std::uint64_t root, double psi) noexcept;

/// Trains a teacher at psi, samples n_points and builds the dataset.
PsiData teacher_data(ModulusPsi psi, std::uint64_t seed, int k, std::size_t n_points, const TrainingConfig& training);

/// One psi of the scan, usable standalone.
TrajectoryPoint fit_at_psi(double psi, const ScanConfig& cfg, const PsiDataProvider& provider);

/// Sorted, deduplicated grid; failed psi entries carry a diagnostic and the
/// scan continues. provider defaults to teacher_data.
CoefficientTrajectory scan_moduli(const ScanConfig& cfg, PsiDataProvider provider = {});

/// Percentile intervals from B row resamples with replacement.
std::array<Interval, 5> bootstrap_ci(const Dataset& ds, int resamples = 1000, double level = 0.95,
                                     std::uint64_t seed = 0);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    std::optional<double> r2;  // nullopt for a constant series
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct LinearTrajectoryFit {
    std::array<LinearFit, 5> coeff;
};

/// Needs at least three successful grid points.
LinearTrajectoryFit linear_fit_trajectory(const CoefficientTrajectory& traj);

enum class Modulation { SignReversal, Monotonic, Weak, Negligible };
std::string_view modulation_name(Modulation m) noexcept;

inline constexpr double kNegligibleCoefficient = 1e-3;

/// Label of one coefficient series; order of the inputs is irrelevant.
/// Precedence: negligible, sign-reversal, monotonic, weak.
Modulation classify_series(std::span<const double> psi, std::span<const double> values,
                           std::span<const double> half_widths);

std::array<Modulation, 5> classify_modulation(const CoefficientTrajectory& traj);

/// Teacher vs student Ricci-flatness on a point set, the student density
/// being det g_FS * exp(f(p2, sigma3)).
ErrorDecomposition error_decomposition(const TeacherModel& teacher, const FiveTermCoefficients& coeffs,
                                       std::span<const QuinticPoint> points);

}  // namespace cyd
