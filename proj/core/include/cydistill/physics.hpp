#pragma once

// Monte Carlo volume of the quintic under a chosen metric and the Fermat-point
// Yukawa normalization check.

#include "cydistill/donaldson.hpp"
#include "cydistill/formula.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>

namespace cyd {

/// Raw volume assigned to the Fubini-Study metric; the normalized FS volume
/// is kVolumeCalibration / 6 = 5/3.
inline constexpr double kVolumeCalibration = 10.0;
inline constexpr double kVolumeReference = 5.0 / 3.0;
inline constexpr std::size_t kMinVolumePoints = 1000;

struct VolumeReport {
    double raw = 0.0;
    double normalized = 0.0;  // raw / 3!
    double mc_error = 0.0;    // standard error of normalized
    double reference = kVolumeReference;
    double agreement_pct = 0.0;  // 100 * normalized / reference
    std::size_t points = 0;
};

/// det g_source / det g_FS at one point.
using DensityRatio = std::function<double(const QuinticPoint&)>;

/// Points must be Fubini-Study distributed (as sample_quintic draws them).
/// Standard error from `batches` contiguous batch means.
VolumeReport volume_integral(const DensityRatio& ratio, std::span<const QuinticPoint> points,
                             int batches = 10, double calibration = kVolumeCalibration);

VolumeReport volume_fubini_study(std::span<const QuinticPoint> points, int batches = 10);
VolumeReport volume_teacher(const TeacherModel& teacher, std::span<const QuinticPoint> points, int batches = 10);
VolumeReport volume_formula(const FiveTermCoefficients& coeffs, std::span<const QuinticPoint> points,
                            int batches = 10);

struct YukawaReport {
    double psi = 0.0;
    std::optional<double> kappa;  // absent when the method does not apply
    double reference = 5.0;
    bool flagged = false;
    std::string note;
    std::optional<double> display_value;  // reference display value, never asserted
};

/// kappa_111 at the Fermat point from the degree of X: the number of
/// intersections of a fixed generic line with the hypersurface.
YukawaReport yukawa_fermat_check(ModulusPsi psi);

}  // namespace cyd
