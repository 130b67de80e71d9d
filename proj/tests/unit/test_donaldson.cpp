#include "cydistill/donaldson.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace cyd;
using cyd::testing::random_hermitian;
using cyd::testing::random_pd;

TEST_SUITE("donaldson") {

TEST_CASE("basis_size") {
    CHECK(basis_size(1) == 5);
    CHECK(basis_size(3) == 35);
    CHECK(basis_size(4) == 70);
    CHECK(basis_size(5) == 125);
    CHECK(basis_size(10) == 875);
    for (int k = 1; k <= 7; ++k) CHECK(MonomialBasis(k).size() == basis_size(k));
}

TEST_CASE("monomial reduction reproduces z0^5 monomials on X") {
    const ModulusPsi psi(0.3);
    const MonomialBasis basis(6);
    const auto pts = sample_quintic(psi, 5, 2);
    const Exponent m{5, 1, 0, 0, 0};
    const auto red = basis.reduce(m, psi);
    for (const auto& p : pts) {
        Complex direct = std::pow(p.z[0], 5) * p.z[1];
        Complex sum = 0.0;
        for (const auto& [i, c] : red) {
            Complex mono = 1.0;
            for (int j = 0; j < 5; ++j) mono *= std::pow(p.z[j], basis.exponents()[i][j]);
            sum += c * mono;
        }
        CHECK(std::abs(sum - direct) < 1e-12);
    }
}

TEST_CASE("FS-equivalent teacher reproduces the FS metric") {
    for (double p : {0.0, 0.5}) {
        const ModulusPsi psi(p);
        const auto pts = sample_quintic(psi, 200, 4);
        for (int k : {1, 2, 3}) {
            const TeacherModel t = TeacherModel::fubini_study(k, psi);
            for (const auto& pt : pts) REQUIRE(std::abs(log_det_ratio(pt, t)) <= 1e-8);
            CHECK(ma_loss(pts, t) <= 1e-12);
        }
    }
    // k = 5 exercises the reduced basis
    const ModulusPsi psi(0.2);
    const auto pts = sample_quintic(psi, 50, 4);
    const TeacherModel t5 = TeacherModel::fubini_study(5, psi);
    for (const auto& pt : pts) REQUIRE(std::abs(log_det_ratio(pt, t5)) <= 1e-8);
}

TEST_CASE("ma_loss: scale invariance and two-pass variance") {
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 100, 8);
    const MonomialBasis basis(2);
    TeacherModel t(basis, random_pd(static_cast<Eigen::Index>(basis.size()), 3), psi);
    const double loss = ma_loss(pts, t);
    CHECK(loss >= 0.0);

    std::vector<double> y;
    double wsum = 0.0, mean = 0.0;
    for (const auto& p : pts) {
        y.push_back(log_det_ratio(p, t));
        wsum += p.weight;
        mean += p.weight * y.back();
    }
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) var += pts[i].weight * (y[i] - mean) * (y[i] - mean);
    var /= wsum;
    CHECK(std::abs(loss - var) <= 1e-12);

    TeacherModel scaled(basis, 3.7 * t.h, psi);
    CHECK(ma_loss(pts, scaled) == doctest::Approx(loss).epsilon(1e-10));
    CHECK(algebraic_metric_det(pts[0], scaled) == doctest::Approx(algebraic_metric_det(pts[0], t)).epsilon(1e-10));
}

TEST_CASE("metric determinant is positive and smooth in H") {
    const ModulusPsi psi(0.4);
    const auto pts = sample_quintic(psi, 20, 12);
    const MonomialBasis basis(3);
    const auto n = static_cast<Eigen::Index>(basis.size());
    TeacherModel t(basis, random_pd(n, 5), psi);
    TeacherModel tp(basis, t.h + 1e-6 * random_hermitian(n, 6), psi);
    for (const auto& p : pts) {
        const double d = algebraic_metric_det(p, t);
        REQUIRE(d > 0.0);
        const double rel = std::abs(algebraic_metric_det(p, tp) / d - 1.0);
        CHECK(rel < 1e-4);
        CHECK(rel > 0.0);
    }
}

TEST_CASE("analytic gradient matches central differences at k=2") {
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 5, 21);
    const MonomialBasis basis(2);
    const auto n = static_cast<Eigen::Index>(basis.size());
    const Eigen::MatrixXcd h = random_pd(n, 17);
    for (LossReference ref : {LossReference::FubiniStudy, LossReference::Omega}) {
        const LossGradient g = log_variance_gradient(pts, h, basis, psi, ref);
        TeacherModel base(basis, h, psi);
        CHECK(g.loss == doctest::Approx(log_variance_loss(pts, base, ref)).epsilon(1e-12));
        const double eps = 1e-6;
        for (int dir = 0; dir < 6; ++dir) {
            Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(n, n);
            if (dir == 0) {
                d(0, 1) = d(1, 0) = 1.0;
            } else if (dir == 1) {
                d(2, 5) = Complex(0.0, 1.0);
                d(5, 2) = Complex(0.0, -1.0);
            } else if (dir == 2) {
                d(3, 3) = 1.0;
            } else {
                d = random_hermitian(n, 100 + static_cast<std::uint64_t>(dir));
            }
            TeacherModel plus(basis, h + eps * d, psi), minus(basis, h - eps * d, psi);
            const double fd = (log_variance_loss(pts, plus, ref) - log_variance_loss(pts, minus, ref)) / (2 * eps);
            const double an = (d * g.grad_h).trace().real();
            CHECK(std::abs(fd - an) <= 1e-5 * std::max(std::abs(an), 1e-3));
        }
    }
}

TEST_CASE("sigma_of_eta oracles") {
    std::vector<double> ones(1000, 1.0), w(1000, 1.0);
    CHECK(sigma_of_eta(ones, w) == 0.0);
    Stream rng(3, "sigma-oracle", 0);
    std::vector<double> eta(100000);
    std::vector<double> w2(eta.size(), 1.0);
    for (auto& e : eta) e = 1.0 + 0.05 * rng.normal();
    const double se = 0.05 / std::sqrt(2.0 * static_cast<double>(eta.size()));
    CHECK(std::abs(sigma_of_eta(eta, w2) - 0.05) < 5 * se + 1e-4);
}

TEST_CASE("FS metric is not Ricci-flat") {
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 2000, 31);
    const double s = ricci_sigma(TeacherModel::fubini_study(2, psi), pts);
    CHECK(s > 0.2);
}

TEST_CASE("Hermitian PD checks and projection") {
    const Eigen::MatrixXcd h = random_pd(6, 2);
    CHECK_NOTHROW(check_hermitian_pd(h));
    Eigen::MatrixXcd bad = h;
    bad(0, 1) += Complex(0.5, 0.0);
    CHECK_THROWS_AS(check_hermitian_pd(bad), NumericalError);
    Eigen::MatrixXcd neg = -h;
    CHECK_THROWS_AS(check_hermitian_pd(neg), NumericalError);

    const Eigen::MatrixXcd once = project_hermitian_pd(bad);
    const Eigen::MatrixXcd twice = project_hermitian_pd(once);
    CHECK((once - twice).norm() <= 1e-12 * once.norm());
    CHECK_NOTHROW(check_hermitian_pd(project_hermitian_pd(neg)));
}

TEST_CASE("training config validation") {
    TrainingConfig c;
    CHECK_NOTHROW(c.validate(3));
    CHECK_THROWS_AS(c.validate(8), ValidationError);
    c.heavy = true;
    CHECK_NOTHROW(c.validate(8));
    TrainingConfig z;
    z.lr0 = 0.0;
    CHECK_THROWS_AS(z.validate(3), ValidationError);
    TrainingConfig d;
    d.lr_decay = 1.5;
    CHECK_THROWS_AS(d.validate(3), ValidationError);
    TrainingConfig b;
    b.batch_size = 0;
    CHECK_THROWS_AS(b.validate(3), ValidationError);
}

TEST_CASE("short training run decreases sigma and is deterministic") {
    TrainingConfig c;
    c.iterations = 4;
    c.batches_per_iteration = 10;
    c.batch_size = 300;
    c.validation_points = 2000;
    c.decay_every = 2;
    c.seed = 5;
    TrainingTrace trace;
    const TeacherModel t = train_balanced_metric(ModulusPsi(0.0), 2, c, &trace);
    REQUIRE(trace.sigma.size() == 5);
    for (double s : trace.sigma) CHECK(std::isfinite(s));
    CHECK(trace.sigma.back() < trace.sigma.front());
    CHECK(t.sigma == trace.sigma.back());
    CHECK_NOTHROW(check_hermitian_pd(t.h));

    const TeacherModel again = train_balanced_metric(ModulusPsi(0.0), 2, c);
    CHECK(again.h == t.h);

    const TeacherModel far = train_balanced_metric(ModulusPsi(0.8), 2, c);
    CHECK(std::isfinite(far.sigma));
}

}  // TEST_SUITE
