#pragma once

// Weighted linear least squares and the fit-quality metrics shared by the
// formula, moduli, symreg and stats modules.

#include "cydistill/common.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cyd {

/// Design matrix with collinear columns; names lists the dependent ones.
class RankDeficientError : public NumericalError {
public:
    RankDeficientError(const std::string& what, std::vector<std::string> names)
        : NumericalError(what), columns(std::move(names)) {}
    std::vector<std::string> columns;
};

/// argmin_b sum_i w_i (y_i - x_i . b)^2 via column-pivoted Householder QR on
/// the sqrt(w)-scaled system. Throws RankDeficientError naming the columns
/// that fall outside the numerical rank.
Eigen::VectorXd solve_wls_qr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             std::span<const std::string> column_names);

/// Same problem through the normal equations (X^T W X) b = X^T W y with LDLT.
/// Independent of the QR path; used as a cross-check.
Eigen::VectorXd solve_wls_normal(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

/// 1 - SS_res / SS_tot with weighted sums around the weighted mean of truth.
/// nullopt when truth is constant (zero weighted variance).
std::optional<double> r_squared(std::span<const double> pred, std::span<const double> truth,
                                std::span<const double> weights);

double weighted_mse(std::span<const double> pred, std::span<const double> truth, std::span<const double> weights);
double weighted_rmse(std::span<const double> pred, std::span<const double> truth, std::span<const double> weights);
double weighted_mean(std::span<const double> v, std::span<const double> weights);
double weighted_variance(std::span<const double> v, std::span<const double> weights);

}  // namespace cyd
