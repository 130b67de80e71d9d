#include "cydistill/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fmt/format.h>

namespace cyd {

ModulusPsi::ModulusPsi(double psi) : psi_(psi) {
    if (!(psi >= 0.0 && psi < 1.0)) {
        throw ValidationError(fmt::format("psi must lie in [0, 1), got {}", psi));
    }
}

std::array<int, 3> Chart::local() const noexcept {
    std::array<int, 3> out{};
    int j = 0;
    for (int i = 0; i < 5; ++i) {
        if (i != affine && i != dependent) out[static_cast<std::size_t>(j++)] = i;
    }
    return out;
}

Complex quintic_eval(const Coords& z, ModulusPsi psi) noexcept {
    Complex sum{0.0, 0.0};
    Complex prod{1.0, 0.0};
    for (const auto& zi : z) {
        const Complex z2 = zi * zi;
        sum += z2 * z2 * zi;
        prod *= zi;
    }
    return sum - 5.0 * psi.value() * prod;
}

Coords quintic_gradient(const Coords& z, ModulusPsi psi) noexcept {
    Coords g{};
    for (std::size_t i = 0; i < 5; ++i) {
        Complex others{1.0, 0.0};
        for (std::size_t j = 0; j < 5; ++j) {
            if (j != i) others *= z[j];
        }
        const Complex z2 = z[i] * z[i];
        g[i] = 5.0 * z2 * z2 - 5.0 * psi.value() * others;
    }
    return g;
}

Chart select_chart(const Coords& z, ModulusPsi psi) noexcept {
    Chart c;
    double best = -1.0;
    for (int i = 0; i < 5; ++i) {
        const double m = std::abs(z[static_cast<std::size_t>(i)]);
        if (m > best) {
            best = m;
            c.affine = i;
        }
    }
    const Coords g = quintic_gradient(z, psi);
    best = -1.0;
    for (int i = 0; i < 5; ++i) {
        if (i == c.affine) continue;
        const double m = std::abs(g[static_cast<std::size_t>(i)]);
        if (m > best) {
            best = m;
            c.dependent = i;
        }
    }
    return c;
}

Coords normalized(const Coords& z) noexcept {
    double norm2 = 0.0;
    for (const auto& zi : z) norm2 += std::norm(zi);
    const double inv = 1.0 / std::sqrt(norm2);
    Coords out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = z[i] * inv;
    return out;
}

FeatureVector features(const Coords& z) noexcept {
    FeatureVector f;
    for (const auto& zi : z) {
        const double x = std::norm(zi);
        f.p2 += x * x;
        f.p3 += x * x * x;
    }
    f.sigma3 = (1.0 - 3.0 * f.p2 + 2.0 * f.p3) / 6.0;
    return f;
}

ElementarySymmetric newton_elementary(double p2, double p3) noexcept {
    return {(1.0 - p2) / 2.0, (1.0 - 3.0 * p2 + 2.0 * p3) / 6.0};
}

ChartFrame ChartFrame::make(const Coords& z, Chart chart, ModulusPsi psi) {
    ChartFrame f;
    f.chart = chart;
    const auto a = static_cast<std::size_t>(chart.affine);
    const auto b = static_cast<std::size_t>(chart.dependent);
    const Complex za = z[a];
    for (std::size_t i = 0; i < 5; ++i) f.w[i] = z[i] / za;
    f.w[a] = Complex{1.0, 0.0};
    const Coords g = quintic_gradient(f.w, psi);
    f.dq_db = g[b];
    if (std::abs(f.dq_db) < kChartTolerance) {
        throw ChartError(fmt::format("chart (a={}, b={}) singular: |dQ/dw_b| = {:.3e}",
                                     chart.affine, chart.dependent, std::abs(f.dq_db)));
    }
    const auto loc = chart.local();
    for (std::size_t mu = 0; mu < 3; ++mu) {
        f.dwb_dx[mu] = -g[static_cast<std::size_t>(loc[mu])] / f.dq_db;
    }
    return f;
}

double fs_pullback_det(const Coords& z, Chart chart, ModulusPsi psi) {
    const ChartFrame f = ChartFrame::make(z, chart, psi);

    // affine coordinates in increasing index order, skipping the affine one
    std::array<int, 4> idx{};
    for (int i = 0, j = 0; i < 5; ++i) {
        if (i != chart.affine) idx[static_cast<std::size_t>(j++)] = i;
    }
    double rho = 1.0;
    for (int i : idx) rho += std::norm(f.w[static_cast<std::size_t>(i)]);

    Eigen::Matrix4cd g;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            const Complex wi = f.w[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
            const Complex wj = f.w[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
            g(i, j) = (i == j ? 1.0 / rho : 0.0) - std::conj(wi) * wj / (rho * rho);
        }
    }

    const auto loc = chart.local();
    Eigen::Matrix<Complex, 3, 4> jac = Eigen::Matrix<Complex, 3, 4>::Zero();
    for (int mu = 0; mu < 3; ++mu) {
        for (int j = 0; j < 4; ++j) {
            const int col = idx[static_cast<std::size_t>(j)];
            if (col == loc[static_cast<std::size_t>(mu)]) jac(mu, j) = 1.0;
            if (col == chart.dependent) jac(mu, j) = f.dwb_dx[static_cast<std::size_t>(mu)];
        }
    }
    const Eigen::Matrix3cd pulled = jac * g * jac.adjoint();
    const double det = pulled.determinant().real();
    if (!(det > 0.0) || !std::isfinite(det)) {
        throw ChartError(fmt::format("non-positive FS pullback determinant {:.3e}", det));
    }
    return det;
}

double omega_density(const Coords& z, Chart chart, ModulusPsi psi) {
    const ChartFrame f = ChartFrame::make(z, chart, psi);
    return 1.0 / std::norm(f.dq_db);
}

double fs_eta(const Coords& z, Chart chart, ModulusPsi psi) {
    return fs_pullback_det(z, chart, psi) / omega_density(z, chart, psi);
}

void normalize_weights(std::span<QuinticPoint> points) {
    if (points.empty()) return;
    double sum = 0.0;
    for (const auto& p : points) sum += p.weight;
    const double scale = static_cast<double>(points.size()) / sum;
    for (auto& p : points) p.weight *= scale;
}

}  // namespace cyd
