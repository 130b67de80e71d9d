#pragma once

// Algebraic "teacher" metrics: degree-k monomial sections on the quintic, a
// Hermitian H-matrix, the Kahler potential K = (1/k) log(s^dagger H s), the
// pulled-back metric determinant, Monge-Ampere losses with analytic gradients,
// the Ricci-flatness indicator sigma(eta) and Adam training.

#include "cydistill/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace cyd {

using Exponent = std::array<int, 5>;

/// Number of independent degree-k sections on the quintic:
/// C(k+4, 4) for k <= 4, C(k+4, 4) - C(k-1, 4) for k >= 5.
std::size_t basis_size(int k);

/// Monomials z^m with |m| = k, excluding those divisible by z_0^5 (which are
/// reducible through Q = 0). Ordered lexicographically descending in m.
class MonomialBasis {
public:
    explicit MonomialBasis(int k);

    int degree() const noexcept { return k_; }
    std::size_t size() const noexcept { return exponents_.size(); }
    const std::vector<Exponent>& exponents() const noexcept { return exponents_; }
    std::optional<std::size_t> index_of(const Exponent& e) const;

    /// Fills out (N x 4) with [s, ds/dx_0, ds/dx_1, ds/dx_2] at the frame's
    /// affine point, derivatives taken along the hypersurface.
    void evaluate(const ChartFrame& frame, Eigen::Ref<Eigen::MatrixXcd> out) const;

    /// Coefficients c with z^m = c^T s on the hypersurface, for any |m| = k.
    std::vector<std::pair<std::size_t, Complex>> reduce(const Exponent& m, ModulusPsi psi) const;

    friend bool operator==(const MonomialBasis& a, const MonomialBasis& b) {
        return a.k_ == b.k_ && a.exponents_ == b.exponents_;
    }

private:
    int k_;
    std::vector<Exponent> exponents_;
    std::map<Exponent, std::size_t> index_;
};

/// The H for which s^dagger H s = (sum |z_i|^2)^k on X, so the algebraic
/// metric equals Fubini-Study. Diagonal multinomial weights for k <= 4.
Eigen::MatrixXcd fs_equivalent_h(const MonomialBasis& basis, ModulusPsi psi);

/// Throws NumericalError unless h is Hermitian (to 1e-12 relative) and PD.
void check_hermitian_pd(const Eigen::MatrixXcd& h);

/// (h + h^dagger)/2 with eigenvalues floored at rel_floor * trace / N.
Eigen::MatrixXcd project_hermitian_pd(const Eigen::MatrixXcd& h, double rel_floor = 1e-10);

struct TeacherModel {
    MonomialBasis basis;
    Eigen::MatrixXcd h;
    ModulusPsi psi;
    double sigma = 0.0;
    std::vector<double> sigma_history;

    TeacherModel(MonomialBasis b, Eigen::MatrixXcd hm, ModulusPsi p)
        : basis(std::move(b)), h(std::move(hm)), psi(p) {}

    /// Teacher whose metric is exactly Fubini-Study.
    static TeacherModel fubini_study(int k, ModulusPsi psi);
};

/// Metric quantities of one point under one H.
struct PointMetric {
    double log_det = 0.0;       // log det of the 3x3 pulled-back algebraic metric
    Eigen::Matrix3cd metric;    // g_{mu nu-bar} in local chart coordinates
};

PointMetric algebraic_metric(const QuinticPoint& point, const MonomialBasis& basis,
                             const Eigen::MatrixXcd& h, ModulusPsi psi);

/// det of the pulled-back algebraic metric. Throws ChartError / NumericalError.
double algebraic_metric_det(const QuinticPoint& point, const TeacherModel& model);

/// y = log(det g_alg / det g_FS): the regression target.
double log_det_ratio(const QuinticPoint& point, const TeacherModel& model);

/// Reference density in the log-variance losses.
enum class LossReference {
    FubiniStudy,  // Var[log(det g_alg / det g_FS)]
    Omega,        // Var[log(det g_alg / |Omega|^2)] = Var[log eta]
};

struct LossGradient {
    double loss = 0.0;
    /// Hermitian G with dL = Re tr(dH G) for Hermitian perturbations dH.
    Eigen::MatrixXcd grad_h;
};

/// Weighted variance of log(det g_alg / reference) over the batch.
double log_variance_loss(std::span<const QuinticPoint> points, const TeacherModel& model,
                         LossReference ref);

/// Loss and its analytic gradient with respect to H.
LossGradient log_variance_gradient(std::span<const QuinticPoint> points,
                                   const Eigen::MatrixXcd& h, const MonomialBasis& basis,
                                   ModulusPsi psi, LossReference ref);

/// Var[log(det g_alg / det g_FS)], weighted by the point weights.
inline double ma_loss(std::span<const QuinticPoint> points, const TeacherModel& model) {
    return log_variance_loss(points, model, LossReference::FubiniStudy);
}

/// Weighted std of eta normalized to weighted mean 1.
double sigma_of_eta(std::span<const double> eta, std::span<const double> weights);

/// eta = det g_alg / |Omega|^2 at each point.
std::vector<double> eta_values(const TeacherModel& model, std::span<const QuinticPoint> points);

/// Ricci-flatness indicator on a point set (>= 100 points).
double ricci_sigma(const TeacherModel& model, std::span<const QuinticPoint> points);

struct TrainingConfig {
    int iterations = 15;
    int batches_per_iteration = 50;
    int batch_size = 1000;
    double lr0 = 0.01;
    double lr_decay = 0.5;
    int decay_every = 5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int validation_points = 10000;
    /// Stop early when |sigma_t - sigma_{t-1}| < tol * sigma_{t-1}; 0 disables.
    double convergence_tol = 0.0;
    bool heavy = false;  // required for k >= 6
    std::uint64_t seed = 1;

    /// Throws ValidationError on out-of-range fields or a heavy k without heavy.
    void validate(int k) const;
};

inline constexpr int kHeavyDegree = 6;

struct TrainingTrace {
    std::vector<double> sigma;  // sigma on the validation set; entry 0 is the initial H
    std::vector<double> loss;   // mean training loss per iteration
};

/// Adam on H = L^dagger L + eps I, L initialized at the FS-equivalent H.
/// Fresh batches per step from streams keyed by (seed, step). Throws
/// NumericalError on divergence.
TeacherModel train_balanced_metric(ModulusPsi psi, int k, const TrainingConfig& cfg,
                                   TrainingTrace* trace = nullptr);

}  // namespace cyd
