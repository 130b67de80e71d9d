#include "cydistill/donaldson.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace cyd {
namespace {

std::size_t binomial(int n, int r) {
    if (r < 0 || n < r) return 0;
    std::size_t out = 1;
    for (int i = 1; i <= r; ++i) out = out * static_cast<std::size_t>(n - r + i) / static_cast<std::size_t>(i);
    return out;
}

double multinomial(const Exponent& m) {
    double out = 1.0;
    int total = 0;
    for (int e : m) {
        for (int j = 1; j <= e; ++j) out *= static_cast<double>(++total) / static_cast<double>(j);
    }
    return out;
}

void enumerate_exponents(int k, int slot, Exponent& cur, std::vector<Exponent>& out) {
    if (slot == 4) {
        cur[4] = k;
        out.push_back(cur);
        return;
    }
    for (int e = k; e >= 0; --e) {
        cur[static_cast<std::size_t>(slot)] = e;
        enumerate_exponents(k - e, slot + 1, cur, out);
    }
}

constexpr std::size_t kPointChunk = 128;

}  // namespace

std::size_t basis_size(int k) {
    if (k < 1) throw ValidationError(fmt::format("basis degree k must be >= 1, got {}", k));
    return binomial(k + 4, 4) - (k >= 5 ? binomial(k - 1, 4) : 0);
}

MonomialBasis::MonomialBasis(int k) : k_(k) {
    basis_size(k);  // validates
    std::vector<Exponent> all;
    Exponent cur{};
    enumerate_exponents(k, 0, cur, all);
    for (const auto& e : all) {
        if (e[0] >= 5) continue;
        index_.emplace(e, exponents_.size());
        exponents_.push_back(e);
    }
}

std::optional<std::size_t> MonomialBasis::index_of(const Exponent& e) const {
    if (auto it = index_.find(e); it != index_.end()) return it->second;
    return std::nullopt;
}

std::vector<std::pair<std::size_t, Complex>> MonomialBasis::reduce(const Exponent& m, ModulusPsi psi) const {
    std::map<std::size_t, Complex> acc;
    // z_0^5 = -sum_{i>0} z_i^5 + 5 psi z_0 z_1 z_2 z_3 z_4 on X
    std::vector<std::pair<Exponent, Complex>> work{{m, Complex{1.0, 0.0}}};
    while (!work.empty()) {
        auto [e, c] = work.back();
        work.pop_back();
        if (e[0] < 5) {
            const auto idx = index_of(e);
            if (!idx) throw std::logic_error("reduce: exponent outside basis");
            acc[*idx] += c;
            continue;
        }
        Exponent base = e;
        base[0] -= 5;
        for (std::size_t i = 1; i < 5; ++i) {
            Exponent t = base;
            t[i] += 5;
            work.emplace_back(t, -c);
        }
        if (psi.value() != 0.0) {
            Exponent t = base;
            for (auto& x : t) x += 1;
            work.emplace_back(t, 5.0 * psi.value() * c);
        }
    }
    std::vector<std::pair<std::size_t, Complex>> out;
    for (const auto& [i, c] : acc) {
        if (c != Complex{0.0, 0.0}) out.emplace_back(i, c);
    }
    return out;
}

void MonomialBasis::evaluate(const ChartFrame& frame, Eigen::Ref<Eigen::MatrixXcd> out) const {
    const int k = k_;
    std::array<std::array<Complex, 16>, 5> pw{};
    if (k >= 16) throw ValidationError("MonomialBasis::evaluate supports k < 16");
    for (std::size_t i = 0; i < 5; ++i) {
        pw[i][0] = Complex{1.0, 0.0};
        for (int e = 1; e <= k; ++e) pw[i][static_cast<std::size_t>(e)] = pw[i][static_cast<std::size_t>(e - 1)] * frame.w[i];
    }
    const auto loc = frame.chart.local();
    const auto b = static_cast<std::size_t>(frame.chart.dependent);

    // d s / d w_i for the four non-affine coordinates (w_a == 1 is fixed)
    auto partial = [&](const Exponent& m, std::size_t i) -> Complex {
        if (m[i] == 0) return Complex{0.0, 0.0};
        Complex v = static_cast<double>(m[i]) * pw[i][static_cast<std::size_t>(m[i] - 1)];
        for (std::size_t j = 0; j < 5; ++j) {
            if (j != i) v *= pw[j][static_cast<std::size_t>(m[j])];
        }
        return v;
    };

    for (std::size_t alpha = 0; alpha < exponents_.size(); ++alpha) {
        const Exponent& m = exponents_[alpha];
        Complex s{1.0, 0.0};
        for (std::size_t j = 0; j < 5; ++j) s *= pw[j][static_cast<std::size_t>(m[j])];
        const auto r = static_cast<Eigen::Index>(alpha);
        out(r, 0) = s;
        const Complex dsb = partial(m, b);
        for (std::size_t mu = 0; mu < 3; ++mu) {
            out(r, static_cast<Eigen::Index>(mu + 1)) =
                partial(m, static_cast<std::size_t>(loc[mu])) + dsb * frame.dwb_dx[mu];
        }
    }
}

Eigen::MatrixXcd fs_equivalent_h(const MonomialBasis& basis, ModulusPsi psi) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    std::vector<Exponent> all;
    Exponent cur{};
    enumerate_exponents(basis.degree(), 0, cur, all);
    for (const auto& m : all) {
        const double weight = multinomial(m);
        const auto c = basis.reduce(m, psi);
        // |z^m|^2 = s^dagger conj(c) c^T s
        for (const auto& [i, ci] : c) {
            for (const auto& [j, cj] : c) {
                h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += weight * std::conj(ci) * cj;
            }
        }
    }
    return h;
}

void check_hermitian_pd(const Eigen::MatrixXcd& h) {
    if (h.rows() != h.cols() || h.rows() == 0) throw NumericalError("H must be a nonempty square matrix");
    if (!h.allFinite()) throw NumericalError("H has non-finite entries");
    const double scale = std::max(h.cwiseAbs().maxCoeff(), 1e-300);
    const double asym = (h - h.adjoint()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) throw NumericalError(fmt::format("H not Hermitian (asymmetry {:.3e})", asym));
    Eigen::LLT<Eigen::MatrixXcd> llt(h);
    if (llt.info() != Eigen::Success) throw NumericalError("H not positive definite");
}

Eigen::MatrixXcd project_hermitian_pd(const Eigen::MatrixXcd& h, double rel_floor) {
    const Eigen::MatrixXcd sym = 0.5 * (h + h.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym);
    Eigen::VectorXd ev = es.eigenvalues();
    const double floor = rel_floor * std::max(sym.trace().real(), 0.0) / static_cast<double>(h.rows());
    if (ev.minCoeff() >= floor && floor > 0.0) return sym;
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), floor > 0.0 ? floor : 1e-300);
    Eigen::MatrixXcd out = es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    return 0.5 * (out + out.adjoint());
}

TeacherModel TeacherModel::fubini_study(int k, ModulusPsi psi) {
    MonomialBasis basis(k);
    Eigen::MatrixXcd h = fs_equivalent_h(basis, psi);
    return TeacherModel(std::move(basis), std::move(h), psi);
}

namespace {

struct PointWork {
    Eigen::Matrix<Complex, Eigen::Dynamic, 4> sections;  // [s, ds/dx]
    Eigen::Matrix4cd gram;                               // B^dagger H B
    Eigen::Matrix3cd metric;
    double rho = 0.0;
    double log_det = 0.0;
};

void evaluate_point(const QuinticPoint& point, const MonomialBasis& basis, const Eigen::MatrixXcd& h,
                    ModulusPsi psi, PointWork& work) {
    const ChartFrame frame = ChartFrame::make(point.z, point.chart, psi);
    work.sections.resize(static_cast<Eigen::Index>(basis.size()), 4);
    basis.evaluate(frame, work.sections);
    work.gram.noalias() = work.sections.adjoint() * (h * work.sections);
    const double rho = work.gram(0, 0).real();
    if (!(rho > 0.0) || !std::isfinite(rho)) throw NumericalError("s^dagger H s is not positive");
    const double k = basis.degree();
    for (int mu = 0; mu < 3; ++mu) {
        for (int nu = 0; nu < 3; ++nu) {
            work.metric(mu, nu) = (work.gram(nu + 1, mu + 1) / rho -
                                   work.gram(0, mu + 1) * work.gram(nu + 1, 0) / (rho * rho)) / k;
        }
    }
    const double det = work.metric.determinant().real();
    if (!(det > 0.0) || !std::isfinite(det)) {
        throw NumericalError(fmt::format("algebraic metric determinant not positive ({:.3e})", det));
    }
    work.rho = rho;
    work.log_det = std::log(det);
}

double reference_log_density(const QuinticPoint& p, ModulusPsi psi, LossReference ref) {
    return ref == LossReference::FubiniStudy ? std::log(fs_pullback_det(p, psi))
                                             : std::log(omega_density(p, psi));
}

}  // namespace

PointMetric algebraic_metric(const QuinticPoint& point, const MonomialBasis& basis,
                             const Eigen::MatrixXcd& h, ModulusPsi psi) {
    PointWork work;
    evaluate_point(point, basis, h, psi, work);
    return {work.log_det, work.metric};
}

double algebraic_metric_det(const QuinticPoint& point, const TeacherModel& model) {
    return std::exp(algebraic_metric(point, model.basis, model.h, model.psi).log_det);
}

double log_det_ratio(const QuinticPoint& point, const TeacherModel& model) {
    return algebraic_metric(point, model.basis, model.h, model.psi).log_det -
           std::log(fs_pullback_det(point, model.psi));
}

double log_variance_loss(std::span<const QuinticPoint> points, const TeacherModel& model,
                         LossReference ref) {
    if (points.empty()) throw ValidationError("loss over an empty batch");
    std::vector<double> ell(points.size());
    parallel_chunks(points.size(), kPointChunk, [&](std::size_t b, std::size_t e) {
        PointWork work;
        for (std::size_t i = b; i < e; ++i) {
            evaluate_point(points[i], model.basis, model.h, model.psi, work);
            ell[i] = work.log_det - reference_log_density(points[i], model.psi, ref);
        }
    });
    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        wsum += points[i].weight;
        mean += points[i].weight * ell[i];
    }
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) var += points[i].weight * (ell[i] - mean) * (ell[i] - mean);
    return var / wsum;
}

LossGradient log_variance_gradient(std::span<const QuinticPoint> points, const Eigen::MatrixXcd& h,
                                   const MonomialBasis& basis, ModulusPsi psi, LossReference ref) {
    if (points.empty()) throw ValidationError("gradient over an empty batch");
    const std::size_t n = points.size();
    const auto dim = static_cast<Eigen::Index>(basis.size());
    const double k = basis.degree();

    // Pass 1: per-point log ratio, plus the 4x4 kernel Phi_p of
    // d(log det g_p) = tr(dH B_p Phi_p B_p^dagger).
    std::vector<double> ell(n);
    std::vector<Eigen::Matrix4cd> phi(n);
    std::vector<Eigen::Matrix<Complex, Eigen::Dynamic, 4>> sections(n);
    parallel_chunks(n, kPointChunk, [&](std::size_t b, std::size_t e) {
        PointWork work;
        for (std::size_t i = b; i < e; ++i) {
            evaluate_point(points[i], basis, h, psi, work);
            ell[i] = work.log_det - reference_log_density(points[i], psi, ref);
            sections[i] = work.sections;

            const Eigen::Matrix3cd t = work.metric.inverse();
            const double rho = work.rho;
            Eigen::Vector3cd a;
            for (int mu = 0; mu < 3; ++mu) a(mu) = work.gram(0, mu + 1);
            Complex c_b{0.0, 0.0};
            for (int mu = 0; mu < 3; ++mu) {
                for (int nu = 0; nu < 3; ++nu) c_b += t(nu, mu) * work.gram(nu + 1, mu + 1);
            }
            const Complex c_e = a.dot(t * a);  // a^dagger T a
            const Eigen::Vector3cd v = t.transpose() * a.conjugate();

            Eigen::Matrix4cd& p = phi[i];
            p(0, 0) = (-c_b / (rho * rho) + 2.0 * c_e / (rho * rho * rho)) / k;
            for (int mu = 0; mu < 3; ++mu) {
                p(mu + 1, 0) = -v(mu) / (rho * rho) / k;
                p(0, mu + 1) = -std::conj(v(mu)) / (rho * rho) / k;
                for (int nu = 0; nu < 3; ++nu) p(mu + 1, nu + 1) = t(nu, mu) / rho / k;
            }
        }
    });

    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(ell[i])) throw NumericalError("non-finite log ratio in loss");
        wsum += points[i].weight;
        mean += points[i].weight * ell[i];
    }
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += points[i].weight * (ell[i] - mean) * (ell[i] - mean);

    // Pass 2: G = sum_p coeff_p B_p Phi_p B_p^dagger, reduced in chunk order.
    const std::size_t chunks = chunk_count(n, kPointChunk);
    std::vector<Eigen::MatrixXcd> partial(chunks);
    parallel_chunks(n, kPointChunk, [&](std::size_t b, std::size_t e) {
        const auto rows = static_cast<Eigen::Index>(e - b);
        Eigen::MatrixXcd left(dim, 4 * rows), right(dim, 4 * rows);
        for (std::size_t i = b; i < e; ++i) {
            const double coeff = 2.0 * points[i].weight * (ell[i] - mean) / wsum;
            const auto col = static_cast<Eigen::Index>(4 * (i - b));
            left.middleCols(col, 4).noalias() = sections[i] * (coeff * phi[i]);
            right.middleCols(col, 4) = sections[i];
        }
        partial[b / kPointChunk].noalias() = left * right.adjoint();
    });
    Eigen::MatrixXcd grad = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& g : partial) grad += g;
    grad = 0.5 * (grad + grad.adjoint());
    return {var / wsum, std::move(grad)};
}

double sigma_of_eta(std::span<const double> eta, std::span<const double> weights) {
    if (eta.size() != weights.size() || eta.empty()) throw ValidationError("sigma_of_eta: size mismatch");
    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        wsum += weights[i];
        mean += weights[i] * eta[i];
    }
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double d = eta[i] / mean - 1.0;
        var += weights[i] * d * d;
    }
    return std::sqrt(var / wsum);
}

std::vector<double> eta_values(const TeacherModel& model, std::span<const QuinticPoint> points) {
    std::vector<double> eta(points.size());
    parallel_chunks(points.size(), kPointChunk, [&](std::size_t b, std::size_t e) {
        PointWork work;
        for (std::size_t i = b; i < e; ++i) {
            evaluate_point(points[i], model.basis, model.h, model.psi, work);
            eta[i] = std::exp(work.log_det) / omega_density(points[i], model.psi);
        }
    });
    return eta;
}

double ricci_sigma(const TeacherModel& model, std::span<const QuinticPoint> points) {
    if (points.size() < 100) throw ValidationError("ricci_sigma needs at least 100 points");
    const auto eta = eta_values(model, points);
    std::vector<double> w(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) w[i] = points[i].weight;
    return sigma_of_eta(eta, w);
}

}  // namespace cyd
