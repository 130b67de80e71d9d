#pragma once

// The five-term scaffold
//   y = c0 + c1/p2^2 + c2*sigma3/p2^3 + c3*p2 + c4*sigma3
// with weighted least-squares fitting, the p2-only ablation and the
// polynomial baseline.

#include "cydistill/dataset.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cyd {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

struct FiveTermCoefficients {
    std::array<double, 5> c{};
    double psi = 0.0;
    std::optional<double> r2;  // nullopt when the evaluation target is constant
    double rmse = 0.0;
    std::optional<std::array<Interval, 5>> ci;

    /// Fermat-point reference coefficients (c0 = 0).
    static FiveTermCoefficients fermat_reference();
};

inline constexpr std::array<const char*, 5> kFiveTermColumns{"1", "1/p2^2", "sigma3/p2^3", "p2", "sigma3"};

std::array<double, 5> five_term_basis(double p2, double sigma3) noexcept;
double eval_five_term(const FiveTermCoefficients& c, double p2, double sigma3) noexcept;

struct ResidualSummary {
    double mean = 0.0;
    double std = 0.0;
    double max_abs = 0.0;
};

struct FitReport {
    std::string model;
    std::vector<std::string> columns;
    std::vector<double> params;
    std::optional<double> r2;
    double rmse = 0.0;
    ResidualSummary residuals;

    std::size_t parameter_count() const noexcept { return params.size(); }
};

/// A model linear in its parameters: named basis columns over (p2, sigma3).
struct LinearBasis {
    std::string model;
    std::vector<std::string> columns;
    std::function<void(double p2, double sigma3, double* out)> fill;
};

LinearBasis five_term_model();
LinearBasis p2_only_model();
/// Monomials p2^a sigma3^b with a + b <= degree, graded then by descending a.
LinearBasis polynomial_model(int degree);

inline constexpr std::size_t kMinFitRows = 10;

/// Weighted LS of `basis` on `train`; statistics on `eval` (or on train when
/// eval is null). Throws ValidationError below kMinFitRows rows and
/// RankDeficientError on collinear columns.
FitReport fit_linear(const Dataset& train, const LinearBasis& basis, const Dataset* eval = nullptr);

/// Predictions of a fitted report on each row.
std::vector<double> predict(const FitReport& fit, const LinearBasis& basis, const Dataset& ds);

FiveTermCoefficients fit_five_term(const Dataset& train, const Dataset* eval = nullptr);
FitReport fit_p2_only(const Dataset& train, const Dataset* eval = nullptr);
FitReport fit_polynomial_baseline(const Dataset& train, int degree = 3, const Dataset* eval = nullptr);

/// Same fit through the normal equations; cross-check of the QR path.
std::array<double, 5> fit_five_term_normal(const Dataset& train);

}  // namespace cyd
