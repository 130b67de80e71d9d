#include "cydistill/least_squares.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>

namespace cyd {
namespace {
void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    if (x.rows() != y.size() || y.size() != w.size()) throw ValidationError("least squares: shape mismatch");
    if (x.rows() < x.cols()) {
        throw ValidationError(fmt::format("least squares: {} rows for {} unknowns", x.rows(), x.cols()));
    }
    if ((w.array() < 0.0).any() || !w.allFinite()) throw ValidationError("least squares: bad weights");
}

void check_sizes(std::span<const double> a, std::span<const double> b, std::span<const double> w) {
    if (a.size() != b.size() || a.size() != w.size() || a.empty()) {
        throw ValidationError("metric: inputs must be nonempty and equally sized");
    }
}
}  // namespace

Eigen::VectorXd solve_wls_qr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             std::span<const std::string> column_names) {
    check_shapes(x, y, w);
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd xs = sw.asDiagonal() * x;
    const Eigen::VectorXd ys = sw.cwiseProduct(y);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < x.cols()) {
        std::vector<std::string> names;
        for (Eigen::Index i = qr.rank(); i < x.cols(); ++i) {
            const auto col = static_cast<std::size_t>(qr.colsPermutation().indices()(i));
            names.push_back(col < column_names.size() ? column_names[col] : fmt::format("column {}", col));
        }
        throw RankDeficientError(
            fmt::format("rank-deficient design ({} of {} columns independent); collinear: {}", qr.rank(),
                        x.cols(), fmt::join(names, ", ")),
            names);
    }
    return qr.solve(ys);
}

Eigen::VectorXd solve_wls_normal(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    check_shapes(x, y, w);
    const Eigen::MatrixXd gram = x.transpose() * w.asDiagonal() * x;
    const Eigen::VectorXd rhs = x.transpose() * w.cwiseProduct(y);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw NumericalError("normal equations: factorization failed");
    return ldlt.solve(rhs);
}

double weighted_mean(std::span<const double> v, std::span<const double> weights) {
    if (v.size() != weights.size() || v.empty()) throw ValidationError("weighted_mean: size mismatch");
    double s = 0.0, ws = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += weights[i] * v[i];
        ws += weights[i];
    }
    return s / ws;
}

double weighted_variance(std::span<const double> v, std::span<const double> weights) {
    const double m = weighted_mean(v, weights);
    double s = 0.0, ws = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += weights[i] * (v[i] - m) * (v[i] - m);
        ws += weights[i];
    }
    return s / ws;
}

std::optional<double> r_squared(std::span<const double> pred, std::span<const double> truth,
                                std::span<const double> weights) {
    check_sizes(pred, truth, weights);
    if (truth.size() < 2) throw ValidationError("r_squared needs at least two points");
    const double m = weighted_mean(truth, weights);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += weights[i] * (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += weights[i] * (truth[i] - m) * (truth[i] - m);
    }
    double scale = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        scale = std::max(scale, std::abs(truth[i]));
        wsum += weights[i];
    }
    if (!(ss_tot > 1e-24 * wsum * scale * scale) || ss_tot == 0.0) return std::nullopt;
    return 1.0 - ss_res / ss_tot;
}

double weighted_mse(std::span<const double> pred, std::span<const double> truth, std::span<const double> weights) {
    check_sizes(pred, truth, weights);
    double s = 0.0, ws = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        s += weights[i] * (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ws += weights[i];
    }
    return s / ws;
}

double weighted_rmse(std::span<const double> pred, std::span<const double> truth, std::span<const double> weights) {
    return std::sqrt(weighted_mse(pred, truth, weights));
}

}  // namespace cyd
