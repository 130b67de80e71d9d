#include "cydistill/geometry.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace cyd;

namespace {

double norm2(const Coords& z) {
    double s = 0.0;
    for (const auto& c : z) s += std::norm(c);
    return s;
}

Coords from_moduli(std::array<double, 5> sq) {
    Coords z{};
    for (int i = 0; i < 5; ++i) z[i] = std::sqrt(sq[i]);
    return z;
}

// Second-best dependent index for the point's affine chart.
Chart alternative_chart(const Coords& z, ModulusPsi psi, Chart c) {
    const Coords g = quintic_gradient(z, psi);
    int best = -1;
    for (int i = 0; i < 5; ++i) {
        if (i == c.affine || i == c.dependent) continue;
        if (best < 0 || std::abs(g[i]) > std::abs(g[best])) best = i;
    }
    return {c.affine, best};
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("psi range") {
    CHECK_NOTHROW(ModulusPsi(0.0));
    CHECK_NOTHROW(ModulusPsi(0.99));
    CHECK_THROWS_AS(ModulusPsi(1.0), ValidationError);
    CHECK_THROWS_AS(ModulusPsi(-0.1), ValidationError);
    CHECK_THROWS_AS(ModulusPsi(1.2), ValidationError);
}

TEST_CASE("quintic_eval examples") {
    CHECK(std::abs(quintic_eval({1.0, -1.0, 0.0, 0.0, 0.0}, ModulusPsi(0.0))) == 0.0);
    CHECK(quintic_eval({1.0, 0.0, 0.0, 0.0, 0.0}, ModulusPsi(0.5)) == Complex(1.0));
    const double r = 0.7;
    CHECK(std::abs(quintic_eval({r, r, r, r, r}, ModulusPsi(0.0)) - 5.0 * std::pow(r, 5)) < 1e-15);
}

TEST_CASE("quintic_eval is homogeneous of degree 5") {
    const Coords z{Complex(0.3, 0.1), Complex(-0.2, 0.5), Complex(0.4, -0.3), Complex(0.1, 0.1), Complex(-0.6, 0.2)};
    const Complex lambda(0.8, -0.6);
    Coords lz;
    for (int i = 0; i < 5; ++i) lz[i] = lambda * z[i];
    const ModulusPsi psi(0.4);
    CHECK(std::abs(quintic_eval(lz, psi) - std::pow(lambda, 5) * quintic_eval(z, psi)) < 1e-14);
}

TEST_CASE("features examples") {
    const auto eq = features(from_moduli({0.2, 0.2, 0.2, 0.2, 0.2}));
    CHECK(eq.p2 == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(eq.p3 == doctest::Approx(0.04).epsilon(1e-14));
    CHECK(eq.sigma3 == doctest::Approx(0.08).epsilon(1e-13));

    const auto one = features(from_moduli({1, 0, 0, 0, 0}));
    CHECK(one.p2 == 1.0);
    CHECK(one.p3 == 1.0);
    CHECK(std::abs(one.sigma3) < 1e-16);

    const auto two = features(from_moduli({0.5, 0.5, 0, 0, 0}));
    CHECK(two.p2 == doctest::Approx(0.5));
    CHECK(two.p3 == doctest::Approx(0.25));
    CHECK(std::abs(two.sigma3) < 1e-15);
}

TEST_CASE("newton_elementary examples") {
    auto a = newton_elementary(0.2, 0.04);
    CHECK(a.e2 == doctest::Approx(0.4));
    CHECK(a.e3 == doctest::Approx(0.08));
    auto b = newton_elementary(1.0, 1.0);
    CHECK(std::abs(b.e2) < 1e-16);
    CHECK(std::abs(b.e3) < 1e-16);
    auto c = newton_elementary(0.5, 0.25);
    CHECK(c.e2 == doctest::Approx(0.25));
    CHECK(std::abs(c.e3) < 1e-16);
}

TEST_CASE("feature identities and ranges on random simplex tuples") {
    Stream rng(11, "geometry-simplex", 0);
    for (int t = 0; t < 100000; ++t) {
        std::array<double, 5> x{};
        double s = 0.0;
        for (auto& v : x) s += (v = -std::log(1.0 - rng.uniform()));
        for (auto& v : x) v /= s;
        double e2 = 0.0, e3 = 0.0;
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                e2 += x[i] * x[j];
                for (int k = j + 1; k < 5; ++k) e3 += x[i] * x[j] * x[k];
            }
        const auto f = features(from_moduli(x));
        const auto e = newton_elementary(f.p2, f.p3);
        REQUIRE(std::abs(e.e2 - e2) <= 1e-12);
        REQUIRE(std::abs(e.e3 - e3) <= 1e-12);
        REQUIRE(std::abs(f.sigma3 - e3) <= 1e-12);
        REQUIRE(f.p2 >= 0.2 - 1e-15);
        REQUIRE(f.p2 <= 1.0 + 1e-15);
        REQUIRE(f.sigma3 >= -1e-15);
        REQUIRE(f.sigma3 <= 0.08 + 1e-15);
    }
}

TEST_CASE("sample_quintic small sample invariants") {
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 5, 42);
    REQUIRE(pts.size() == 5);
    for (const auto& p : pts) {
        CHECK(std::abs(quintic_eval(p.z, psi)) <= kQuinticTolerance);
        CHECK(std::abs(norm2(p.z) - 1.0) <= 1e-12);
        CHECK(p.weight > 0.0);
        CHECK(p.chart.affine != p.chart.dependent);
        CHECK(p.chart == select_chart(p.z, psi));
    }
    CHECK_THROWS_AS(sample_quintic(psi, 0, 1), ValidationError);
}

TEST_CASE("sample_quintic feature statistics at the Fermat point") {
    const auto pts = sample_quintic(ModulusPsi(0.0), 10000, 7);
    double mean = 0.0, lo = 1.0, smax = 0.0, wsum = 0.0;
    for (const auto& p : pts) {
        const auto f = features(p);
        mean += f.p2;
        lo = std::min(lo, f.p2);
        smax = std::max(smax, f.sigma3);
        wsum += p.weight;
    }
    mean /= static_cast<double>(pts.size());
    CHECK(mean == doctest::Approx(0.27).epsilon(0.01 / 0.27));
    CHECK(lo >= 0.20);
    CHECK(smax <= 0.08);
    CHECK(wsum / static_cast<double>(pts.size()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sample_quintic on the deformed family") {
    for (double p : {0.4, 0.8}) {
        const ModulusPsi psi(p);
        for (const auto& pt : sample_quintic(psi, 500, 3)) {
            REQUIRE(std::abs(quintic_eval(pt.z, psi)) <= kQuinticTolerance);
            REQUIRE(std::abs(norm2(pt.z) - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("sample_quintic is independent of the thread count") {
    const ModulusPsi psi(0.2);
    set_thread_count(1);
    const auto a = sample_quintic(psi, 3000, 5);
    set_thread_count(4);
    const auto b = sample_quintic(psi, 3000, 5);
    set_thread_count(0);
    REQUIRE(a.size() == b.size());
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].z == b[i].z && a[i].weight == b[i].weight;
    CHECK(same);
}

TEST_CASE("FS pullback and Omega density: positivity, phase and chart invariance") {
    const ModulusPsi psi(0.3);
    const auto pts = sample_quintic(psi, 200, 9);
    const Complex phase = std::polar(1.0, 0.7);
    for (const auto& p : pts) {
        const double det = fs_pullback_det(p, psi);
        const double om = omega_density(p, psi);
        REQUIRE(det > 0.0);
        REQUIRE(om > 0.0);

        Coords rz;
        for (int i = 0; i < 5; ++i) rz[i] = phase * p.z[i];
        CHECK(fs_pullback_det(rz, p.chart, psi) == doctest::Approx(det).epsilon(1e-12));
        CHECK(omega_density(rz, p.chart, psi) == doctest::Approx(om).epsilon(1e-12));

        const double eta = fs_eta(p.z, p.chart, psi);
        const Chart alt = alternative_chart(p.z, psi, p.chart);
        if (std::abs(ChartFrame::make(p.z, p.chart, psi).dq_db) < 1e-3) continue;
        try {
            CHECK(fs_eta(p.z, alt, psi) == doctest::Approx(eta).epsilon(1e-8));
        } catch (const ChartError&) {
        }
    }
}

TEST_CASE("chart failure is signalled") {
    // At z = (1, 0, 0, 0, 0) with psi = 0 every dQ/dz_b (b != 0) vanishes.
    const Coords z{1.0, 0.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(fs_pullback_det(z, Chart{0, 1}, ModulusPsi(0.0)), ChartError);
    CHECK_THROWS_AS(omega_density(z, Chart{0, 1}, ModulusPsi(0.0)), ChartError);
}

TEST_CASE("line intersections lie on the hypersurface") {
    const ModulusPsi psi(0.5);
    const Coords p{Complex(0.3, 0.2), Complex(-0.1, 0.4), Complex(0.5, 0.0), Complex(0.0, -0.2), Complex(0.1, 0.1)};
    const Coords q{Complex(-0.2, 0.1), Complex(0.3, 0.3), Complex(0.0, 0.4), Complex(0.6, 0.0), Complex(-0.1, 0.2)};
    const auto roots = line_intersections(p, q, psi);
    CHECK(roots.size() == 5);
    for (const auto& t : roots) {
        Coords z;
        for (int i = 0; i < 5; ++i) z[i] = p[i] + t * q[i];
        CHECK(std::abs(quintic_eval(normalized(z), psi)) <= kQuinticTolerance);
    }
}

}  // TEST_SUITE
