#include "cydistill/donaldson.hpp"

#include <cmath>
#include <fmt/format.h>

namespace cyd {

void TrainingConfig::validate(int k) const {
    basis_size(k);
    if (iterations < 1 || batches_per_iteration < 1 || batch_size < 1 || decay_every < 1) {
        throw ValidationError("training counts must all be >= 1");
    }
    if (validation_points < 100) throw ValidationError("validation_points must be >= 100");
    if (!(lr0 > 0.0)) throw ValidationError("lr0 must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValidationError("lr_decay must lie in (0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("Adam betas must lie in [0, 1)");
    }
    if (k >= kHeavyDegree && !heavy) {
        throw ValidationError(fmt::format(
            "k = {} needs heavy mode (basis size {}, ~{} real H parameters); rerun with --heavy",
            k, basis_size(k), 2 * basis_size(k) * basis_size(k)));
    }
}

namespace {

// Adam state on the real and imaginary parts of a complex matrix; the second
// moment stores (v_re, v_im) in the real/imag slots.
struct ComplexAdam {
    Eigen::MatrixXcd m, v;
    double beta1, beta2, eps;
    long step = 0;

    ComplexAdam(Eigen::Index n, double b1, double b2, double e)
        : m(Eigen::MatrixXcd::Zero(n, n)), v(Eigen::MatrixXcd::Zero(n, n)), beta1(b1), beta2(b2), eps(e) {}

    void apply(Eigen::MatrixXcd& param, const Eigen::MatrixXcd& grad, double lr) {
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (Eigen::Index j = 0; j < param.cols(); ++j) {
            for (Eigen::Index i = 0; i < param.rows(); ++i) {
                const Complex g = grad(i, j);
                m(i, j) = beta1 * m(i, j) + (1.0 - beta1) * g;
                v(i, j) = beta2 * v(i, j) + (1.0 - beta2) * Complex{g.real() * g.real(), g.imag() * g.imag()};
                const Complex mh = m(i, j) / c1;
                const double vr = v(i, j).real() / c2;
                const double vi = v(i, j).imag() / c2;
                param(i, j) -= lr * Complex{mh.real() / (std::sqrt(vr) + eps), mh.imag() / (std::sqrt(vi) + eps)};
            }
        }
    }
};

Eigen::MatrixXcd h_from_factor(const Eigen::MatrixXcd& l) {
    Eigen::MatrixXcd h = l.adjoint() * l;
    const double eps = 1e-10 * h.trace().real() / static_cast<double>(h.rows());
    h.diagonal().array() += eps;
    return 0.5 * (h + h.adjoint());
}

}  // namespace

TeacherModel train_balanced_metric(ModulusPsi psi, int k, const TrainingConfig& cfg, TrainingTrace* trace) {
    cfg.validate(k);
    TeacherModel model = TeacherModel::fubini_study(k, psi);

    // H = L^dagger L with L upper triangular from the Cholesky factor of H_FS
    Eigen::LLT<Eigen::MatrixXcd> llt(model.h);
    if (llt.info() != Eigen::Success) throw NumericalError("FS-equivalent H is not positive definite");
    Eigen::MatrixXcd l = llt.matrixU();

    const auto validation = sample_quintic(psi, static_cast<std::size_t>(cfg.validation_points),
                                           derive_seed(cfg.seed, "train-validation"));
    TrainingTrace local;
    TrainingTrace& tr = trace ? *trace : local;
    tr.sigma.assign(1, ricci_sigma(model, validation));
    tr.loss.clear();

    ComplexAdam adam(l.rows(), cfg.beta1, cfg.beta2, cfg.adam_epsilon);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const double lr = cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(iter / cfg.decay_every));
        double loss_sum = 0.0;
        for (int batch = 0; batch < cfg.batches_per_iteration; ++batch) {
            const auto step = static_cast<std::uint64_t>(iter) * static_cast<std::uint64_t>(cfg.batches_per_iteration) +
                              static_cast<std::uint64_t>(batch);
            const auto points = sample_quintic(psi, static_cast<std::size_t>(cfg.batch_size),
                                               derive_seed(cfg.seed, "train-batch", step));
            const Eigen::MatrixXcd h = h_from_factor(l);
            LossGradient lg = log_variance_gradient(points, h, model.basis, psi, LossReference::Omega);
            if (!std::isfinite(lg.loss) || !lg.grad_h.allFinite()) {
                throw NumericalError(fmt::format("training diverged at iteration {}, batch {} (loss {})",
                                                 iter, batch, lg.loss));
            }
            loss_sum += lg.loss;
            // dL/dL = 2 L G for H = L^dagger L
            const Eigen::MatrixXcd grad_l = 2.0 * l * lg.grad_h;
            adam.apply(l, grad_l, lr);
            l = l.triangularView<Eigen::Upper>();
        }
        model.h = project_hermitian_pd(h_from_factor(l));
        check_hermitian_pd(model.h);
        const double sigma = ricci_sigma(model, validation);
        if (!std::isfinite(sigma)) throw NumericalError(fmt::format("sigma not finite at iteration {}", iter));
        tr.loss.push_back(loss_sum / cfg.batches_per_iteration);
        tr.sigma.push_back(sigma);
        if (cfg.convergence_tol > 0.0) {
            const double prev = tr.sigma[tr.sigma.size() - 2];
            if (std::abs(sigma - prev) < cfg.convergence_tol * prev) break;
        }
    }
    model.sigma = tr.sigma.back();
    model.sigma_history = tr.sigma;
    return model;
}

}  // namespace cyd
