#include "cydistill/stats.hpp"

#include "cydistill/formula.hpp"
#include "cydistill/least_squares.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace cyd {

std::string_view feature_name(Feature f) noexcept { return f == Feature::P2 ? "p2" : "sigma3"; }

double PermutationResult::null_mean() const noexcept {
    if (null_r2.empty()) return 0.0;
    return std::accumulate(null_r2.begin(), null_r2.end(), 0.0) / static_cast<double>(null_r2.size());
}

namespace {
double fit_r2(const Dataset& ds) {
    // a constant target has no variance to explain
    return fit_five_term(ds).r2.value_or(0.0);
}
}  // namespace

PermutationResult permutation_test(const Dataset& ds, Feature feature, int permutations, std::uint64_t seed) {
    if (permutations < kMinPermutations) throw ValidationError("permutation test needs B >= 100");
    PermutationResult res;
    res.feature = feature;
    res.baseline_r2 = fit_r2(ds);
    const auto b = static_cast<std::size_t>(permutations);
    res.null_r2.assign(b, 0.0);
    parallel_chunks(b, 8, [&](std::size_t lo, std::size_t hi) {
        Dataset shuffled = ds;
        std::vector<double> column(ds.size());
        for (std::size_t r = lo; r < hi; ++r) {
            for (std::size_t i = 0; i < ds.size(); ++i) {
                column[i] = feature == Feature::P2 ? ds.rows[i].p2 : ds.rows[i].sigma3;
            }
            Stream rng(seed, "permutation", r);
            for (std::size_t i = column.size(); i > 1; --i) std::swap(column[i - 1], column[rng.below(i)]);
            for (std::size_t i = 0; i < ds.size(); ++i) {
                (feature == Feature::P2 ? shuffled.rows[i].p2 : shuffled.rows[i].sigma3) = column[i];
            }
            try {
                res.null_r2[r] = fit_r2(shuffled);
            } catch (const RankDeficientError&) {
                res.null_r2[r] = 0.0;
            }
        }
    });
    const auto hits = std::count_if(res.null_r2.begin(), res.null_r2.end(),
                                    [&](double v) { return v >= res.baseline_r2; });
    res.p_value = static_cast<double>(hits + 1) / static_cast<double>(b + 1);
    return res;
}

LosoResult loso_cv(const EnsembleReport& ensemble, const Dataset& holdout) {
    const std::size_t m = ensemble.members.size();
    if (m < 3) throw ValidationError("LOSO needs at least three ensemble members");
    if (holdout.size() < 2) throw ValidationError("LOSO needs at least two holdout rows");
    const std::size_t n = holdout.size();
    std::vector<double> truth(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        truth[i] = holdout.rows[i].y;
        w[i] = holdout.rows[i].weight;
    }
    const auto [tmin, tmax] = std::minmax_element(truth.begin(), truth.end());
    const double range = *tmax - *tmin;
    if (!(range > 0.0)) throw ValidationError("LOSO holdout target is constant");

    std::vector<std::vector<double>> preds(m, std::vector<double>(n));
    for (std::size_t s = 0; s < m; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            preds[s][i] = ensemble.members[s].tree.evaluate(holdout.rows[i].p2, holdout.rows[i].sigma3);
        }
    }
    std::vector<double> sum(n, 0.0);
    for (const auto& p : preds) {
        for (std::size_t i = 0; i < n; ++i) sum[i] += p[i];
    }
    std::vector<double> full(n);
    for (std::size_t i = 0; i < n; ++i) full[i] = sum[i] / static_cast<double>(m);

    LosoResult out;
    out.full_r2 = r_squared(full, truth, w).value_or(0.0);
    std::vector<double> pred(n);
    for (std::size_t s = 0; s < m; ++s) {
        for (std::size_t i = 0; i < n; ++i) pred[i] = (sum[i] - preds[s][i]) / static_cast<double>(m - 1);
        LosoFold f;
        f.left_out = ensemble.members[s].seed;
        f.nrmse = weighted_rmse(pred, truth, w) / range;
        f.r2 = r_squared(pred, truth, w).value_or(0.0);
        f.delta_r2 = f.r2 - out.full_r2;
        out.folds.push_back(f);
    }
    double s1 = 0.0, s2 = 0.0;
    for (const auto& f : out.folds) {
        s1 += f.nrmse;
        out.mean_r2 += f.r2;
        out.worst_nrmse = std::max(out.worst_nrmse, f.nrmse);
    }
    out.mean_nrmse = s1 / static_cast<double>(m);
    out.mean_r2 /= static_cast<double>(m);
    for (const auto& f : out.folds) s2 += (f.nrmse - out.mean_nrmse) * (f.nrmse - out.mean_nrmse);
    out.std_nrmse = std::sqrt(s2 / static_cast<double>(m - 1));
    return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
    if (values.empty() || values.size() != weights.size()) throw ValidationError("weighted_quantile: bad input");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    // midpoint rule on cumulative weight
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> pos(idx.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        pos[j] = (acc + 0.5 * weights[idx[j]]) / total;
        acc += weights[idx[j]];
    }
    if (q <= pos.front()) return values[idx.front()];
    if (q >= pos.back()) return values[idx.back()];
    const auto it = std::upper_bound(pos.begin(), pos.end(), q);
    const auto j = static_cast<std::size_t>(it - pos.begin());
    const double t = (q - pos[j - 1]) / (pos[j] - pos[j - 1]);
    return values[idx[j - 1]] + t * (values[idx[j]] - values[idx[j - 1]]);
}

ResidualDiagnostics residual_diagnostics(std::span<const double> pred, std::span<const double> truth,
                                         std::span<const double> weights, std::size_t qq_points) {
    if (pred.size() != truth.size() || pred.size() != weights.size()) {
        throw ValidationError("residual_diagnostics: length mismatch");
    }
    if (pred.size() < kMinDiagnosticPoints) {
        throw ValidationError(fmt::format("residual_diagnostics needs at least {} points", kMinDiagnosticPoints));
    }
    const std::size_t n = pred.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = truth[i] - pred[i];
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);

    ResidualDiagnostics d;
    for (std::size_t i = 0; i < n; ++i) d.mean += weights[i] * r[i];
    d.mean /= wsum;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = r[i] - d.mean;
        const double e2 = e * e;
        m2 += weights[i] * e2;
        m3 += weights[i] * e2 * e;
        m4 += weights[i] * e2 * e2;
    }
    m2 /= wsum;
    m3 /= wsum;
    m4 /= wsum;
    d.std = std::sqrt(m2);
    if (m2 > 0.0) {
        d.skewness = m3 / (m2 * d.std);
        d.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    d.central95 = {weighted_quantile(r, weights, 0.025), weighted_quantile(r, weights, 0.975)};

    if (qq_points > 0) {
        d.qq.reserve(qq_points);
        const boost::math::normal_distribution<double> unit;
        for (std::size_t j = 0; j < qq_points; ++j) {
            const double p = (static_cast<double>(j) + 1.0) / (static_cast<double>(qq_points) + 1.0);
            d.qq.push_back({d.mean + d.std * boost::math::quantile(unit, p), weighted_quantile(r, weights, p)});
        }
    }
    return d;
}

}  // namespace cyd
