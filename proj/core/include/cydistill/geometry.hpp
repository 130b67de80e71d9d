#pragma once

// Dwork quintic family Q_psi = sum z_i^5 - 5 psi prod z_i in P^4: evaluation,
// chart selection, point sampling, Fubini-Study pullback, the holomorphic
// volume-form density and the gauge-invariant power-sum features.

#include "cydistill/common.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace cyd {

using Coords = std::array<Complex, 5>;

class ModulusPsi {
public:
    /// Throws ValidationError unless 0 <= psi < 1.
    explicit ModulusPsi(double psi);

    double value() const noexcept { return psi_; }
    friend bool operator==(ModulusPsi, ModulusPsi) = default;

private:
    double psi_;
};

/// Affine chart z_a = 1 with z_b eliminated through Q = 0; the remaining three
/// coordinates are the local holomorphic coordinates.
struct Chart {
    int affine = 0;
    int dependent = 1;

    std::array<int, 3> local() const noexcept;
    friend bool operator==(const Chart&, const Chart&) = default;
};

struct QuinticPoint {
    Coords z{};
    Chart chart{};
    double weight = 1.0;
};

struct FeatureVector {
    double p2 = 0.0;
    double p3 = 0.0;
    double sigma3 = 0.0;
};

struct ElementarySymmetric {
    double e2 = 0.0;
    double e3 = 0.0;
};

inline constexpr double kQuinticTolerance = 1e-10;
inline constexpr double kChartTolerance = 1e-8;

Complex quintic_eval(const Coords& z, ModulusPsi psi) noexcept;

/// dQ/dz_i for all i.
Coords quintic_gradient(const Coords& z, ModulusPsi psi) noexcept;

/// a = argmax |z_i|, b = argmax_{i != a} |dQ/dz_i|.
Chart select_chart(const Coords& z, ModulusPsi psi) noexcept;

/// z / ||z||, so that sum |z_i|^2 = 1.
Coords normalized(const Coords& z) noexcept;

/// p2 = sum|z|^4, p3 = sum|z|^6, sigma3 = (1 - 3 p2 + 2 p3)/6 for normalized z.
FeatureVector features(const Coords& z) noexcept;
inline FeatureVector features(const QuinticPoint& p) noexcept { return features(p.z); }

/// Newton's identities under e1 = 1.
ElementarySymmetric newton_elementary(double p2, double p3) noexcept;

/// Affine-chart data at a point: w = z / z_a, and the holomorphic Jacobian of
/// the embedding w(x) of the local coordinates x = (w_l0, w_l1, w_l2).
struct ChartFrame {
    Chart chart;
    Coords w{};                        // w[affine] == 1
    std::array<Complex, 3> dwb_dx{};   // d w_b / d x_mu
    Complex dq_db{};                   // dQ/dw_b in the affine chart

    /// Throws ChartError when |dQ/dw_b| < kChartTolerance.
    static ChartFrame make(const Coords& z, Chart chart, ModulusPsi psi);
};

/// det of the 3x3 pullback of the Fubini-Study metric g = i dd-bar log(1+|w|^2)
/// in the given chart. Throws ChartError on a near-singular chart.
double fs_pullback_det(const Coords& z, Chart chart, ModulusPsi psi);
inline double fs_pullback_det(const QuinticPoint& p, ModulusPsi psi) {
    return fs_pullback_det(p.z, p.chart, psi);
}

/// Omega wedge Omega-bar relative to chart Lebesgue measure: 1 / |dQ/dw_b|^2.
double omega_density(const Coords& z, Chart chart, ModulusPsi psi);
inline double omega_density(const QuinticPoint& p, ModulusPsi psi) {
    return omega_density(p.z, p.chart, psi);
}

/// Chart-invariant ratio det g_FS / |Omega|^2.
double fs_eta(const Coords& z, Chart chart, ModulusPsi psi);

/// Samples n points by intersecting random lines with Q_psi = 0. Points come
/// out distributed by the Fubini-Study volume of X; weights convert to the
/// Omega-wedge-Omega-bar measure and are rescaled to mean 1. Each line draws
/// from its own stream keyed by (seed, line index), so the output does not
/// depend on the thread count. Throws ValidationError for n == 0 and
/// NumericalError after 100 consecutive degenerate lines.
std::vector<QuinticPoint> sample_quintic(ModulusPsi psi, std::size_t n, std::uint64_t seed);

/// Roots t of Q_psi(p + t q) (five of them, multiplicity counted), polished by
/// Newton steps. Returns fewer than five if the leading coefficient vanishes.
std::vector<Complex> line_intersections(const Coords& p, const Coords& q, ModulusPsi psi);

/// Rescale weights in place so their mean is 1.
void normalize_weights(std::span<QuinticPoint> points);

}  // namespace cyd
