#include "cydistill/moduli.hpp"

#include "cydistill/least_squares.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace cyd {

void ScanConfig::validate() const {
    if (psis.empty()) throw ValidationError("scan needs at least one psi");
    for (double p : psis) {
        if (!(p >= 0.0 && p <= kMaxScanPsi)) throw ValidationError(fmt::format("scan psi {} outside [0, 0.8]", p));
    }
    training.validate(k);
    if (n_points < kMinFitRows) throw ValidationError("scan n_points below the fit minimum");
    if (bootstrap_resamples != 0 && bootstrap_resamples < 100) throw ValidationError("bootstrap needs B >= 100");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("interval level must lie in (0, 1)");
}

std::vector<double> CoefficientTrajectory::psis(bool ok_only) const {
    std::vector<double> out;
    for (const auto& p : points) {
        if (p.ok || !ok_only) out.push_back(p.psi);
    }
    return out;
}

std::vector<double> CoefficientTrajectory::column(std::size_t i, bool ok_only) const {
    std::vector<double> out;
    for (const auto& p : points) {
        if (p.ok || !ok_only) out.push_back(p.coeffs.c.at(i));
    }
    return out;
}

std::uint64_t psi_seed(std::uint64_t root, double psi) noexcept {
    return derive_seed(root, "moduli-psi", std::bit_cast<std::uint64_t>(psi + 0.0));
}

PsiData teacher_data(ModulusPsi psi, std::uint64_t seed, int k, std::size_t n_points, const TrainingConfig& training) {
    TrainingConfig tc = training;
    tc.seed = derive_seed(seed, "teacher");
    auto teacher = std::make_shared<const TeacherModel>(train_balanced_metric(psi, k, tc));
    auto points = std::make_shared<const std::vector<QuinticPoint>>(
        sample_quintic(psi, n_points, derive_seed(seed, "dataset-points")));
    PsiData out;
    out.dataset = build_dataset(*teacher, *points);
    out.teacher_sigma = teacher->sigma;
    out.teacher = std::move(teacher);
    out.points = std::move(points);
    return out;
}

TrajectoryPoint fit_at_psi(double psi, const ScanConfig& cfg, const PsiDataProvider& provider) {
    TrajectoryPoint tp;
    tp.psi = psi;
    const std::uint64_t seed = psi_seed(cfg.seed, psi);
    try {
        PsiData data = provider ? provider(ModulusPsi(psi), seed)
                                : teacher_data(ModulusPsi(psi), seed, cfg.k, cfg.n_points, cfg.training);
        tp.coeffs = fit_five_term(data.dataset);
        tp.coeffs.psi = psi;
        tp.teacher_sigma = data.teacher_sigma;
        tp.rows = data.dataset.size();
        if (cfg.bootstrap_resamples > 0) {
            tp.coeffs.ci = bootstrap_ci(data.dataset, cfg.bootstrap_resamples, cfg.level,
                                        derive_seed(seed, "bootstrap"));
        }
        if (data.teacher && data.points) {
            tp.budget = error_decomposition(*data.teacher, tp.coeffs, *data.points);
        }
        tp.ok = true;
    } catch (const NumericalError& e) {
        tp.ok = false;
        tp.error = e.what();
    }
    return tp;
}

CoefficientTrajectory scan_moduli(const ScanConfig& cfg, PsiDataProvider provider) {
    cfg.validate();
    std::vector<double> grid = cfg.psis;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    CoefficientTrajectory traj;
    // psi jobs run one after another; each stage inside is already parallel
    for (double psi : grid) traj.points.push_back(fit_at_psi(psi, cfg, provider));
    return traj;
}

namespace {
double percentile(std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}
}  // namespace

std::array<Interval, 5> bootstrap_ci(const Dataset& ds, int resamples, double level, std::uint64_t seed) {
    if (resamples < 100) throw ValidationError("bootstrap needs B >= 100");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("interval level must lie in (0, 1)");
    if (ds.size() < kMinFitRows) throw ValidationError("bootstrap needs at least 10 rows");
    const auto b = static_cast<std::size_t>(resamples);
    std::vector<std::array<double, 5>> draws(b);
    std::vector<char> valid(b, 0);
    parallel_chunks(b, 8, [&](std::size_t lo, std::size_t hi) {
        std::vector<std::size_t> idx(ds.size());
        for (std::size_t r = lo; r < hi; ++r) {
            Stream rng(seed, "bootstrap-resample", r);
            for (auto& i : idx) i = rng.below(ds.size());
            try {
                draws[r] = fit_five_term(subset(ds, idx)).c;
                valid[r] = 1;
            } catch (const NumericalError&) {
                // degenerate resample, skipped
            }
        }
    });
    const auto ok = static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
    if (ok * 10 < b * 9) throw NumericalError("bootstrap: too many degenerate resamples");
    std::array<Interval, 5> out;
    const double alpha = 0.5 * (1.0 - level);
    for (std::size_t c = 0; c < 5; ++c) {
        std::vector<double> col;
        col.reserve(ok);
        for (std::size_t r = 0; r < b; ++r) {
            if (valid[r]) col.push_back(draws[r][c]);
        }
        out[c] = {percentile(col, alpha), percentile(col, 1.0 - alpha)};
    }
    return out;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("linear_fit needs matched series of >= 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("linear_fit: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    std::vector<double> pred(x.size()), w(x.size(), 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) pred[i] = f.intercept + f.slope * x[i];
    f.r2 = r_squared(pred, y, w);
    if (!f.r2) f.slope = 0.0;
    return f;
}

LinearTrajectoryFit linear_fit_trajectory(const CoefficientTrajectory& traj) {
    const auto x = traj.psis();
    if (x.size() < 3) throw ValidationError("trajectory fit needs at least three grid points");
    LinearTrajectoryFit out;
    for (std::size_t i = 0; i < 5; ++i) out.coeff[i] = linear_fit(x, traj.column(i));
    return out;
}

std::string_view modulation_name(Modulation m) noexcept {
    switch (m) {
        case Modulation::SignReversal: return "sign-reversal";
        case Modulation::Monotonic: return "monotonic";
        case Modulation::Weak: return "weak";
        case Modulation::Negligible: return "negligible";
    }
    return "?";
}

Modulation classify_series(std::span<const double> psi, std::span<const double> values,
                           std::span<const double> half_widths) {
    if (psi.size() != values.size() || (!half_widths.empty() && half_widths.size() != values.size())) {
        throw ValidationError("classify: series lengths differ");
    }
    if (values.size() < 3) throw ValidationError("classify needs at least three grid points");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return psi[a] < psi[b]; });
    auto hw = [&](std::size_t i) { return half_widths.empty() ? 0.0 : std::abs(half_widths[i]); };

    double max_abs = 0.0;
    for (double v : values) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs < kNegligibleCoefficient) return Modulation::Negligible;

    const auto [imin, imax] = std::minmax_element(values.begin(), values.end());
    const auto lo = static_cast<std::size_t>(imin - values.begin());
    const auto hi = static_cast<std::size_t>(imax - values.begin());
    if (*imin < 0.0 && *imax > 0.0 && std::abs(*imin) > hw(lo) && std::abs(*imax) > hw(hi)) {
        return Modulation::SignReversal;
    }

    int direction = 0;
    bool monotonic = true;
    for (std::size_t j = 1; j < order.size() && monotonic; ++j) {
        const std::size_t a = order[j - 1], b = order[j];
        const double d = values[b] - values[a];
        const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (s == 0 || std::abs(d) <= hw(a) + hw(b) || (direction != 0 && s != direction)) monotonic = false;
        direction = s;
    }
    if (monotonic) return Modulation::Monotonic;
    return Modulation::Weak;
}

std::array<Modulation, 5> classify_modulation(const CoefficientTrajectory& traj) {
    const auto x = traj.psis();
    std::array<Modulation, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) {
        std::vector<double> hw;
        bool all_ci = true;
        for (const auto& p : traj.points) {
            if (!p.ok) continue;
            if (p.coeffs.ci) {
                hw.push_back(0.5 * (*p.coeffs.ci)[i].width());
            } else {
                all_ci = false;
            }
        }
        if (!all_ci) hw.clear();
        out[i] = classify_series(x, traj.column(i), hw);
    }
    return out;
}

ErrorDecomposition error_decomposition(const TeacherModel& teacher, const FiveTermCoefficients& coeffs,
                                       std::span<const QuinticPoint> points) {
    ErrorDecomposition e;
    e.teacher_sigma = ricci_sigma(teacher, points);
    std::vector<double> eta(points.size()), w(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const FeatureVector f = features(p);
        eta[i] = fs_eta(p.z, p.chart, teacher.psi) * std::exp(eval_five_term(coeffs, f.p2, f.sigma3));
        w[i] = p.weight;
    }
    e.student_sigma = sigma_of_eta(eta, w);
    e.distillation = e.student_sigma - e.teacher_sigma;
    return e;
}

}  // namespace cyd
