#include "cydistill/formula.hpp"

#include "cydistill/least_squares.hpp"

#include <cmath>
#include <fmt/format.h>

namespace cyd {

FiveTermCoefficients FiveTermCoefficients::fermat_reference() {
    FiveTermCoefficients f;
    f.c = {0.0, 0.0022, -0.0011, 0.1245, 0.050};
    return f;
}

std::array<double, 5> five_term_basis(double p2, double sigma3) noexcept {
    const double inv2 = 1.0 / (p2 * p2);
    return {1.0, inv2, sigma3 * inv2 / p2, p2, sigma3};
}

double eval_five_term(const FiveTermCoefficients& c, double p2, double sigma3) noexcept {
    const auto b = five_term_basis(p2, sigma3);
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += c.c[i] * b[i];
    return s;
}

LinearBasis five_term_model() {
    return {"five-term",
            {kFiveTermColumns.begin(), kFiveTermColumns.end()},
            [](double p2, double s3, double* out) {
                const auto b = five_term_basis(p2, s3);
                std::copy(b.begin(), b.end(), out);
            }};
}

LinearBasis p2_only_model() {
    return {"p2-only", {"1", "1/p2^2", "p2"}, [](double p2, double, double* out) {
                out[0] = 1.0;
                out[1] = 1.0 / (p2 * p2);
                out[2] = p2;
            }};
}

LinearBasis polynomial_model(int degree) {
    if (degree < 1) throw ValidationError("polynomial degree must be >= 1");
    std::vector<std::pair<int, int>> exps;
    for (int d = 0; d <= degree; ++d) {
        for (int a = d; a >= 0; --a) exps.emplace_back(a, d - a);
    }
    std::vector<std::string> names;
    for (auto [a, b] : exps) names.push_back(fmt::format("p2^{} sigma3^{}", a, b));
    return {fmt::format("poly-deg{}", degree), std::move(names), [exps](double p2, double s3, double* out) {
                for (std::size_t i = 0; i < exps.size(); ++i) {
                    out[i] = std::pow(p2, exps[i].first) * std::pow(s3, exps[i].second);
                }
            }};
}

namespace {

Eigen::MatrixXd design(const Dataset& ds, const LinearBasis& basis) {
    const auto m = static_cast<Eigen::Index>(basis.columns.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.size()), m);
    std::vector<double> row(basis.columns.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        basis.fill(ds.rows[i].p2, ds.rows[i].sigma3, row.data());
        for (Eigen::Index j = 0; j < m; ++j) x(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
    }
    return x;
}

void targets(const Dataset& ds, Eigen::VectorXd& y, Eigen::VectorXd& w) {
    y.resize(static_cast<Eigen::Index>(ds.size()));
    w.resize(y.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        y(static_cast<Eigen::Index>(i)) = ds.rows[i].y;
        w(static_cast<Eigen::Index>(i)) = ds.rows[i].weight;
    }
}

}  // namespace

std::vector<double> predict(const FitReport& fit, const LinearBasis& basis, const Dataset& ds) {
    std::vector<double> out(ds.size());
    std::vector<double> row(basis.columns.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        basis.fill(ds.rows[i].p2, ds.rows[i].sigma3, row.data());
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) s += fit.params[j] * row[j];
        out[i] = s;
    }
    return out;
}

FitReport fit_linear(const Dataset& train, const LinearBasis& basis, const Dataset* eval) {
    if (train.size() < kMinFitRows) {
        throw ValidationError(fmt::format("{} fit needs at least {} rows, got {}", basis.model, kMinFitRows, train.size()));
    }
    Eigen::VectorXd y, w;
    targets(train, y, w);
    const Eigen::VectorXd beta = solve_wls_qr(design(train, basis), y, w, basis.columns);

    FitReport rep;
    rep.model = basis.model;
    rep.columns = basis.columns;
    rep.params.assign(beta.data(), beta.data() + beta.size());

    const Dataset& target = eval ? *eval : train;
    const auto pred = predict(rep, basis, target);
    std::vector<double> truth, wt, res;
    for (std::size_t i = 0; i < target.size(); ++i) {
        truth.push_back(target.rows[i].y);
        wt.push_back(target.rows[i].weight);
        res.push_back(target.rows[i].y - pred[i]);
    }
    if (!target.empty()) {
        rep.r2 = r_squared(pred, truth, wt);
        rep.rmse = weighted_rmse(pred, truth, wt);
        rep.residuals.mean = weighted_mean(res, wt);
        rep.residuals.std = std::sqrt(weighted_variance(res, wt));
        for (double r : res) rep.residuals.max_abs = std::max(rep.residuals.max_abs, std::abs(r));
    }
    return rep;
}

FiveTermCoefficients fit_five_term(const Dataset& train, const Dataset* eval) {
    const FitReport rep = fit_linear(train, five_term_model(), eval);
    FiveTermCoefficients out;
    std::copy(rep.params.begin(), rep.params.end(), out.c.begin());
    out.psi = train.psi.value();
    out.r2 = rep.r2;
    out.rmse = rep.rmse;
    return out;
}

FitReport fit_p2_only(const Dataset& train, const Dataset* eval) { return fit_linear(train, p2_only_model(), eval); }

FitReport fit_polynomial_baseline(const Dataset& train, int degree, const Dataset* eval) {
    return fit_linear(train, polynomial_model(degree), eval);
}

std::array<double, 5> fit_five_term_normal(const Dataset& train) {
    if (train.size() < kMinFitRows) throw ValidationError("five-term fit needs at least 10 rows");
    Eigen::VectorXd y, w;
    targets(train, y, w);
    const Eigen::VectorXd beta = solve_wls_normal(design(train, five_term_model()), y, w);
    std::array<double, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = beta(static_cast<Eigen::Index>(i));
    return out;
}

}  // namespace cyd
