#include "cydistill/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fmt/format.h>

namespace cyd {
namespace {

using Poly = std::array<Complex, 6>;  // coefficients of t^0 .. t^5

Poly restrict_to_line(const Coords& p, const Coords& q, ModulusPsi psi) {
    static constexpr std::array<double, 6> binom{1, 5, 10, 10, 5, 1};
    Poly c{};
    for (std::size_t i = 0; i < 5; ++i) {
        std::array<Complex, 6> pp{}, qq{};
        pp[0] = qq[0] = Complex{1.0, 0.0};
        for (std::size_t e = 1; e < 6; ++e) {
            pp[e] = pp[e - 1] * p[i];
            qq[e] = qq[e - 1] * q[i];
        }
        for (std::size_t j = 0; j < 6; ++j) c[j] += binom[j] * pp[5 - j] * qq[j];
    }
    // prod_i (p_i + t q_i)
    Poly prod{};
    prod[0] = Complex{1.0, 0.0};
    for (std::size_t i = 0; i < 5; ++i) {
        Poly next{};
        for (std::size_t j = 0; j <= i; ++j) {
            next[j] += prod[j] * p[i];
            next[j + 1] += prod[j] * q[i];
        }
        prod = next;
    }
    for (std::size_t j = 0; j < 6; ++j) c[j] -= 5.0 * psi.value() * prod[j];
    return c;
}

std::pair<Complex, Complex> horner(const Poly& c, Complex t) {
    Complex v = c[5];
    Complex d{0.0, 0.0};
    for (int j = 4; j >= 0; --j) {
        d = d * t + v;
        v = v * t + c[static_cast<std::size_t>(j)];
    }
    return {v, d};
}

Coords point_on_line(const Coords& p, const Coords& q, Complex t) {
    Coords z{};
    for (std::size_t i = 0; i < 5; ++i) z[i] = p[i] + t * q[i];
    return z;
}

Coords gaussian_coords(Stream& rng) {
    Coords z{};
    for (auto& zi : z) {
        const double re = rng.normal();
        const double im = rng.normal();
        zi = Complex{re, im};
    }
    return z;
}

constexpr int kMaxConsecutiveFailures = 100;
constexpr std::size_t kLinesPerChunk = 64;

// Five points from one line, or false if the line is degenerate.
bool points_from_line(const Coords& p, const Coords& q, ModulusPsi psi,
                      std::array<QuinticPoint, 5>& out) {
    const auto roots = line_intersections(p, q, psi);
    if (roots.size() != 5) return false;
    for (std::size_t r = 0; r < 5; ++r) {
        const Coords z = normalized(point_on_line(p, q, roots[r]));
        if (!(std::abs(quintic_eval(z, psi)) <= kQuinticTolerance)) return false;
        QuinticPoint pt;
        pt.z = z;
        pt.chart = select_chart(z, psi);
        try {
            pt.weight = 1.0 / fs_eta(z, pt.chart, psi);
        } catch (const ChartError&) {
            return false;
        }
        if (!(pt.weight > 0.0) || !std::isfinite(pt.weight)) return false;
        out[r] = pt;
    }
    return true;
}

}  // namespace

std::vector<Complex> line_intersections(const Coords& p, const Coords& q, ModulusPsi psi) {
    const Poly c = restrict_to_line(p, q, psi);
    double scale = 0.0;
    for (const auto& ci : c) scale = std::max(scale, std::abs(ci));
    if (!(scale > 0.0) || std::abs(c[5]) < 1e-12 * scale) return {};

    Eigen::Matrix<Complex, 5, 5> companion = Eigen::Matrix<Complex, 5, 5>::Zero();
    for (int i = 1; i < 5; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < 5; ++i) companion(i, 4) = -c[static_cast<std::size_t>(i)] / c[5];
    Eigen::ComplexEigenSolver<Eigen::Matrix<Complex, 5, 5>> solver(companion, false);
    if (solver.info() != Eigen::Success) return {};

    std::vector<Complex> roots;
    roots.reserve(5);
    for (int i = 0; i < 5; ++i) {
        Complex t = solver.eigenvalues()(i);
        // Newton polish; stop once the residual stops improving
        auto [v, d] = horner(c, t);
        for (int it = 0; it < 4 && std::abs(d) > 0.0; ++it) {
            const Complex tn = t - v / d;
            auto [vn, dn] = horner(c, tn);
            if (!(std::abs(vn) < std::abs(v))) break;
            t = tn;
            v = vn;
            d = dn;
        }
        if (!std::isfinite(t.real()) || !std::isfinite(t.imag())) return {};
        roots.push_back(t);
    }
    return roots;
}

std::vector<QuinticPoint> sample_quintic(ModulusPsi psi, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ValidationError("sample_quintic: n must be >= 1");
    const std::size_t lines = (n + 4) / 5;
    std::vector<QuinticPoint> points(lines * 5);

    parallel_chunks(lines, kLinesPerChunk, [&](std::size_t begin, std::size_t end) {
        for (std::size_t line = begin; line < end; ++line) {
            Stream rng(seed, "sample-line", line);
            std::array<QuinticPoint, 5> five{};
            int failures = 0;
            for (;;) {
                const Coords p = gaussian_coords(rng);
                const Coords q = gaussian_coords(rng);
                if (points_from_line(p, q, psi, five)) break;
                if (++failures >= kMaxConsecutiveFailures) {
                    throw NumericalError(fmt::format(
                        "sample_quintic: {} consecutive degenerate lines (line {})", failures, line));
                }
            }
            std::copy(five.begin(), five.end(), points.begin() + static_cast<std::ptrdiff_t>(5 * line));
        }
    });

    points.resize(n);
    normalize_weights(points);
    return points;
}

}  // namespace cyd
