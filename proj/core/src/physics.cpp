#include "cydistill/physics.hpp"

#include <array>
#include <cmath>
#include <fmt/format.h>

namespace cyd {

VolumeReport volume_integral(const DensityRatio& ratio, std::span<const QuinticPoint> points, int batches,
                             double calibration) {
    if (points.size() < kMinVolumePoints) {
        throw ValidationError(fmt::format("volume needs at least {} points", kMinVolumePoints));
    }
    if (batches < 2) throw ValidationError("volume needs at least two batches");
    const auto nb = static_cast<std::size_t>(batches);
    std::vector<double> values(points.size());
    parallel_chunks(points.size(), 1024, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) values[i] = ratio(points[i]);
    });

    // contiguous batches, summed in index order
    std::vector<double> means(nb, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
        const std::size_t lo = j * points.size() / nb;
        const std::size_t hi = (j + 1) * points.size() / nb;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += values[i];
        total += s;
        means[j] = s / static_cast<double>(hi - lo);
    }
    const double mean = total / static_cast<double>(points.size());
    double ss = 0.0;
    for (double m : means) ss += (m - mean) * (m - mean);
    const double se = std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));

    VolumeReport r;
    r.points = points.size();
    r.raw = calibration * mean;
    r.normalized = r.raw / 6.0;
    r.mc_error = calibration * se / 6.0;
    r.agreement_pct = 100.0 * r.normalized / r.reference;
    if (!(r.raw > 0.0) || !std::isfinite(r.raw)) throw NumericalError("volume estimate is not positive");
    return r;
}

VolumeReport volume_fubini_study(std::span<const QuinticPoint> points, int batches) {
    return volume_integral([](const QuinticPoint&) { return 1.0; }, points, batches);
}

VolumeReport volume_teacher(const TeacherModel& teacher, std::span<const QuinticPoint> points, int batches) {
    return volume_integral([&](const QuinticPoint& p) { return std::exp(log_det_ratio(p, teacher)); }, points,
                           batches);
}

VolumeReport volume_formula(const FiveTermCoefficients& coeffs, std::span<const QuinticPoint> points, int batches) {
    return volume_integral(
        [&](const QuinticPoint& p) {
            const FeatureVector f = features(p);
            return std::exp(eval_five_term(coeffs, f.p2, f.sigma3));
        },
        points, batches);
}

namespace {
struct DisplayValue {
    double psi;
    double kappa;
};
constexpr std::array<DisplayValue, 3> kDisplayKappa{{{0.1, 4.999998}, {0.2, 4.999936}, {0.5, 4.993719}}};
}  // namespace

YukawaReport yukawa_fermat_check(ModulusPsi psi) {
    YukawaReport r;
    r.psi = psi.value();
    if (psi.value() != 0.0) {
        r.flagged = true;
        r.note = "method unspecified for psi != 0; no value computed";
        for (const auto& d : kDisplayKappa) {
            if (d.psi == psi.value()) r.display_value = d.kappa;
        }
        return r;
    }
    // fixed line in general position; any such line meets X in deg X points
    const Coords p{Complex{0.3, 0.1}, Complex{-0.7, 0.2}, Complex{0.45, -0.35}, Complex{0.1, 0.8}, Complex{-0.2, -0.5}};
    const Coords q{Complex{0.6, -0.4}, Complex{0.25, 0.55}, Complex{-0.15, 0.05}, Complex{-0.9, 0.3}, Complex{0.35, 0.65}};
    const auto roots = line_intersections(p, q, psi);
    int count = 0;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        Coords z;
        for (std::size_t j = 0; j < 5; ++j) z[j] = p[j] + roots[i] * q[j];
        if (!(std::abs(quintic_eval(normalized(z), psi)) <= kQuinticTolerance)) continue;
        bool distinct = true;
        for (std::size_t j = 0; j < i; ++j) distinct = distinct && std::abs(roots[i] - roots[j]) > 1e-8;
        count += distinct ? 1 : 0;
    }
    r.kappa = static_cast<double>(count);
    r.note = "degree of the quintic (intersection number of the hyperplane class)";
    return r;
}

}  // namespace cyd
