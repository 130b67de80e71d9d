#pragma once

#include "cydistill/dataset.hpp"
#include "cydistill/formula.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

namespace cyd::testing {

/// Random Hermitian PD matrix, well conditioned.
inline Eigen::MatrixXcd random_pd(Eigen::Index n, std::uint64_t seed) {
    Stream rng(seed, "test-random-pd", 0);
    Eigen::MatrixXcd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(rng.normal(), rng.normal());
    }
    Eigen::MatrixXcd h = a * a.adjoint() / static_cast<double>(n);
    h += Eigen::MatrixXcd::Identity(n, n);
    return h;
}

inline Eigen::MatrixXcd random_hermitian(Eigen::Index n, std::uint64_t seed) {
    Stream rng(seed, "test-random-hermitian", 0);
    Eigen::MatrixXcd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(rng.normal(), rng.normal());
    }
    return (a + a.adjoint()) / 2.0;
}

inline FiveTermCoefficients coeffs(std::array<double, 5> c) {
    FiveTermCoefficients f;
    f.c = c;
    return f;
}

// Coefficient trajectory rows (c0 = 0) by psi = 0, 0.2, 0.4, 0.6, 0.8.
inline constexpr std::array<double, 5> kTrajectoryPsi{0.0, 0.2, 0.4, 0.6, 0.8};
inline constexpr std::array<std::array<double, 5>, 5> kTrajectoryRows{{
    {0.0, 0.0022, -0.0011, 0.124, 0.050},
    {0.0, -0.0039, -0.0055, -0.040, 0.375},
    {0.0, -0.0038, -0.0076, -0.048, 0.519},
    {0.0, -0.0027, -0.0095, -0.055, 0.598},
    {0.0, -0.0006, -0.0126, -0.075, 0.741},
}};
// 95% CI half-widths (last printed digit) of c1..c4 by psi.
inline constexpr std::array<std::array<double, 4>, 5> kTrajectoryHalfWidths{{
    {0.0002, 0.0001, 0.001, 0.001},
    {0.0004, 0.0006, 0.002, 0.008},
    {0.0004, 0.0008, 0.002, 0.009},
    {0.0005, 0.0009, 0.003, 0.011},
    {0.0008, 0.0012, 0.004, 0.015},
}};

/// Rows with the five-term target plus Gaussian noise on the given points.
inline Dataset planted_on_points(std::span<const QuinticPoint> points, const FiveTermCoefficients& c,
                                 double noise, std::uint64_t seed, double psi = 0.0) {
    Stream rng(seed, "test-plant-noise", 0);
    Dataset ds = planted_dataset(points, ModulusPsi(psi),
                                 [&](const FeatureVector& f) { return eval_five_term(c, f.p2, f.sigma3); });
    if (noise > 0.0) {
        for (auto& r : ds.rows) r.y += noise * rng.normal();
    }
    return ds;
}

/// Independent design: (p2, sigma3) uniform on [0.2, 0.49] x [0, 0.08], unit
/// weights, five-term target plus Gaussian noise. On quintic points sigma3
/// is almost a function of p2, which hides sigma3 from any selection rule
/// that charges for complexity.
inline Dataset planted_independent(std::size_t n, const FiveTermCoefficients& c, double noise,
                                   std::uint64_t seed) {
    Stream rng(seed, "test-plant-independent", 0);
    Dataset ds;
    ds.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RegressionRow r;
        r.p2 = 0.2 + 0.29 * rng.uniform();
        r.sigma3 = 0.08 * rng.uniform();
        r.p3 = (6.0 * r.sigma3 - 1.0 + 3.0 * r.p2) / 2.0;
        r.y = eval_five_term(c, r.p2, r.sigma3) + noise * rng.normal();
        ds.rows.push_back(r);
    }
    return ds;
}

inline std::vector<double> column_y(const Dataset& ds) {
    std::vector<double> v;
    for (const auto& r : ds.rows) v.push_back(r.y);
    return v;
}

inline std::vector<double> column_w(const Dataset& ds) {
    std::vector<double> v;
    for (const auto& r : ds.rows) v.push_back(r.weight);
    return v;
}

}  // namespace cyd::testing
