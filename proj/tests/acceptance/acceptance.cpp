// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance 5 7        selected criteria

#include "cydistill/least_squares.hpp"
#include "cydistill/moduli.hpp"
#include "cydistill/physics.hpp"
#include "cydistill/stats.hpp"
#include "cydistill/symreg.hpp"

#include "fixtures.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

using namespace cyd;
using namespace cyd::testing;

namespace {

constexpr std::uint64_t kRoot = 1;

struct Outcome {
    std::vector<std::string> failed;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        notes.push_back(what);
        if (!ok) failed.push_back(what);
    }
    void note(const std::string& what) { notes.push_back(what); }
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// k=3 (and k=4) teachers with their datasets, trained once per process.
const PsiData& teacher_at(double psi, int k) {
    static std::map<std::pair<double, int>, std::unique_ptr<PsiData>> cache;
    auto& slot = cache[{psi, k}];
    if (!slot) {
        slot = std::make_unique<PsiData>(teacher_data(ModulusPsi(psi), psi_seed(kRoot, psi), k, 10000, TrainingConfig{}));
    }
    return *slot;
}

const FiveTermCoefficients kReferencePlant = FiveTermCoefficients::fermat_reference();
const FiveTermCoefficients kIndependentPlant = coeffs({0.0, -0.0006, -0.0126, -0.075, 0.741});

std::vector<std::uint64_t> seeds(std::string_view label, int n) {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < n; ++i) out.push_back(derive_seed(kRoot, label, static_cast<std::uint64_t>(i)));
    return out;
}

double weighted_std(const Dataset& ds) { return std::sqrt(weighted_variance(column_y(ds), column_w(ds))); }

// ---------------------------------------------------------------------------

void exact_algebra(Outcome& o) {
    Stopwatch sw;
    Stream rng(kRoot, "acceptance-tuples", 0);
    double e2_err = 0.0, e3_err = 0.0;
    for (int n = 0; n < 1000000; ++n) {
        Coords z;
        for (auto& c : z) c = Complex(rng.normal(), rng.normal());
        z = normalized(z);
        std::array<double, 5> x{};
        for (std::size_t i = 0; i < 5; ++i) x[i] = std::norm(z[i]);
        double e2 = 0.0, e3 = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = i + 1; j < 5; ++j) {
                e2 += x[i] * x[j];
                for (std::size_t l = j + 1; l < 5; ++l) e3 += x[i] * x[j] * x[l];
            }
        }
        const FeatureVector f = features(z);
        e2_err = std::max(e2_err, std::abs(e2 - (1.0 - f.p2) / 2.0));
        e3_err = std::max(e3_err, std::abs(e3 - f.sigma3));
        const ElementarySymmetric es = newton_elementary(f.p2, f.p3);
        e2_err = std::max(e2_err, std::abs(es.e2 - e2));
        e3_err = std::max(e3_err, std::abs(es.e3 - e3));
    }
    const double secs = sw.seconds();
    const double corner = features(Coords{1, 0, 0, 0, 0}).sigma3;
    const double s = 1.0 / std::sqrt(5.0);
    const double centre = features(Coords{s, s, s, s, s}).sigma3;
    o.check(e2_err <= 1e-12, fmt::format("max|e2 err| {:.1e}", e2_err));
    o.check(e3_err <= 1e-12, fmt::format("max|sigma3 err| {:.1e}", e3_err));
    o.check(std::abs(corner) <= 1e-15, fmt::format("sigma3(vertex) {:.3g}", corner));
    o.check(std::abs(centre - 0.08) <= 1e-15, fmt::format("sigma3(centre) {:.17g}", centre));
    o.check(secs < 5.0, fmt::format("{:.2f} s", secs));
}

void sampling(Outcome& o) {
    Stopwatch sw;
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 10000, derive_seed(kRoot, "acceptance-sampling"));
    double q = 0.0, norm = 0.0, mean = 0.0, lo = 1.0, hi = 0.0;
    for (const auto& p : pts) {
        q = std::max(q, std::abs(quintic_eval(p.z, psi)));
        double s = 0.0;
        for (const auto& c : p.z) s += std::norm(c);
        norm = std::max(norm, std::abs(s - 1.0));
        const double p2 = features(p).p2;
        mean += p2;
        lo = std::min(lo, p2);
        hi = std::max(hi, p2);
    }
    mean /= static_cast<double>(pts.size());
    const double secs = sw.seconds();
    o.check(pts.size() == 10000, fmt::format("n {}", pts.size()));
    o.check(q <= 1e-10, fmt::format("max|Q| {:.1e}", q));
    o.check(norm <= 1e-12, fmt::format("max|sum|z|^2-1| {:.1e}", norm));
    o.check(std::abs(mean - 0.27) <= 0.02, fmt::format("mean p2 {:.4f}", mean));
    o.check(lo >= 0.2 - 1e-12 && lo < 0.21 && hi > 0.45 && hi <= 0.5, fmt::format("p2 range [{:.3f}, {:.3f}]", lo, hi));
    o.check(secs < 60.0, fmt::format("{:.2f} s", secs));
}

void identity_null(Outcome& o) {
    for (double psi : {0.0, 0.4}) {
        const ModulusPsi m(psi);
        const auto pts = sample_quintic(m, 2000, derive_seed(kRoot, "acceptance-null"));
        for (int k : {2, 3}) {
            const TeacherModel t = TeacherModel::fubini_study(k, m);
            double y = 0.0;
            for (const auto& p : pts) y = std::max(y, std::abs(log_det_ratio(p, t)));
            const double loss = ma_loss(pts, t);
            o.check(y <= 1e-8, fmt::format("psi {} k {} max|y| {:.1e}", psi, k, y));
            o.check(loss <= 1e-12, fmt::format("ma_loss {:.1e}", loss));
        }
    }
}

void gradient(Outcome& o) {
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 5, derive_seed(kRoot, "acceptance-gradient"));
    const MonomialBasis basis(2);
    const auto n = static_cast<Eigen::Index>(basis.size());
    const Eigen::MatrixXcd h = random_pd(n, derive_seed(kRoot, "acceptance-h"));
    const LossGradient g = log_variance_gradient(pts, h, basis, psi, LossReference::FubiniStudy);
    const double eps = 1e-6;
    double worst = 0.0;
    for (int dir = 0; dir < 8; ++dir) {
        const Eigen::MatrixXcd d = random_hermitian(n, derive_seed(kRoot, "acceptance-direction", static_cast<std::uint64_t>(dir)));
        const TeacherModel plus(basis, h + eps * d, psi), minus(basis, h - eps * d, psi);
        const double fd = (ma_loss(pts, plus) - ma_loss(pts, minus)) / (2 * eps);
        const double an = (d * g.grad_h).trace().real();
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
    }
    o.check(worst <= 1e-5, fmt::format("worst relative error {:.1e} over 8 directions (loss {:.3e})", worst, g.loss));
}

void teacher_convergence(Outcome& o) {
    Stopwatch sw;
    const TeacherModel& t3 = *teacher_at(0.0, 3).teacher;
    const TeacherModel& t4 = *teacher_at(0.0, 4).teacher;
    const double secs = sw.seconds();
    o.check(t3.sigma_history.back() < t3.sigma_history.front(),
            fmt::format("k3 sigma {:.4f} -> {:.4f}", t3.sigma_history.front(), t3.sigma_history.back()));
    o.check(t4.sigma_history.back() < t4.sigma_history.front(),
            fmt::format("k4 sigma {:.4f} -> {:.4f}", t4.sigma_history.front(), t4.sigma_history.back()));
    o.check(t4.sigma < t3.sigma, fmt::format("sigma(k4) {:.4f} < sigma(k3) {:.4f}", t4.sigma, t3.sigma));
    o.check(secs < 1800.0, fmt::format("{:.0f} s", secs));
}

void least_squares_oracle(Outcome& o) {
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 10000, derive_seed(kRoot, "acceptance-ls"));
    const FiveTermCoefficients exact = fit_five_term(planted_on_points(pts, kReferencePlant, 0.0, 1));
    double err = 0.0;
    for (std::size_t i = 0; i < 5; ++i) err = std::max(err, std::abs(exact.c[i] - kReferencePlant.c[i]));
    o.check(err <= 1e-8, fmt::format("noiseless max|dc| {:.1e}", err));

    const Dataset noisy = planted_on_points(pts, kReferencePlant, 0.01, 2);
    const FiveTermCoefficients fit = fit_five_term(noisy);
    const Dataset clean = planted_on_points(pts, kReferencePlant, 0.0, 2);
    o.check(fit.r2 && *fit.r2 > 0.99,
            fmt::format("noisy R2 {:.4f} (signal std {:.4f} vs noise 0.01)", fit.r2.value_or(NAN), weighted_std(clean)));

    std::array<int, 5> covered{};
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const auto tp = sample_quintic(psi, 2000, derive_seed(kRoot, "acceptance-coverage-points", t));
        const Dataset ds = planted_on_points(tp, kReferencePlant, 0.01, derive_seed(kRoot, "acceptance-coverage-noise", t));
        const auto ci = bootstrap_ci(ds, 1000, 0.95, derive_seed(kRoot, "acceptance-coverage-boot", t));
        for (std::size_t i = 0; i < 5; ++i) covered[i] += ci[i].contains(kReferencePlant.c[i]);
    }
    bool ok = true;
    for (int c : covered) ok = ok && std::abs(c - 95) <= 5;
    o.check(ok, fmt::format("CI coverage /100 {}", fmt::join(covered, ",")));
}

void ablation(Outcome& o) {
    const Dataset& ds = teacher_at(0.0, 3).dataset;
    const auto [train, test] = split(ds, 0.8, derive_seed(kRoot, "fit-split"));
    const FiveTermCoefficients five = fit_five_term(train, &test);
    const FitReport p2 = fit_p2_only(train, &test);
    const double mean = weighted_mean(column_y(train), column_w(train));
    const std::vector<double> flat(test.size(), mean);
    const double constant = weighted_rmse(flat, column_y(test), column_w(test));
    o.check(five.rmse < p2.rmse && p2.rmse < constant,
            fmt::format("k3 teacher RMSE five-term {:.4f} < p2-only {:.4f} < constant {:.4f}", five.rmse, p2.rmse,
                        constant));

    const auto pts = sample_quintic(ModulusPsi(0.0), 10000, derive_seed(kRoot, "acceptance-ablation"));
    const Dataset planted = planted_on_points(pts, kReferencePlant, 1e-5, 3);
    const auto [ptrain, ptest] = split(planted, 0.8, derive_seed(kRoot, "acceptance-ablation-split"));
    const double five_p = fit_five_term(ptrain, &ptest).rmse;
    const double poly_p = fit_polynomial_baseline(ptrain, 3, &ptest).rmse;
    o.check(five_p < poly_p, fmt::format("planted RMSE five-term {:.2e} < poly3 {:.2e}", five_p, poly_p));
}

double best_loss_within(const ParetoFront& f, std::size_t cmax) {
    double best = INFINITY;
    for (const auto& e : f.entries) {
        if (e.complexity <= cmax) best = std::min(best, e.loss);
    }
    return best;
}

void symreg_recovery(Outcome& o) {
    const auto pts = sample_quintic(ModulusPsi(0.0), 1000, derive_seed(kRoot, "acceptance-symreg"));
    const Dataset lin = planted_dataset(pts, ModulusPsi(0.0), [](const FeatureVector& f) { return 2 * f.p2 + 3 * f.sigma3; });
    const Dataset p2 = planted_dataset(pts, ModulusPsi(0.0), [](const FeatureVector& f) { return f.p2; });
    int hit_lin = 0, hit_p2 = 0;
    for (std::uint64_t s : seeds("acceptance-symreg-seed", 10)) {
        SymregConfig c;
        c.seed = s;
        hit_lin += best_loss_within(evolve(lin, c), kMaxComplexity) <= 1e-8;
        hit_p2 += best_loss_within(evolve(p2, c), kMaxComplexity) <= 1e-8;
    }
    o.check(hit_lin >= 9, fmt::format("2p2+3sigma3 {}/10", hit_lin));
    o.check(hit_p2 >= 9, fmt::format("p2 {}/10", hit_p2));

    ParetoFront worked;
    for (auto [loss, text] : {std::pair{0.10, "(+ p2 1)"}, std::pair{0.01, "(+ (+ (+ p2 1) (+ p2 1)) (+ (+ p2 1) (+ p2 1)))"},
                              std::pair{0.50, "p2"}}) {
        ParetoEntry e;
        e.tree = ExpressionTree::parse(text);
        e.complexity = e.tree.complexity();
        e.loss = loss;
        worked.entries.push_back(e);
    }
    std::vector<std::string> scores;
    bool exact = true;
    for (const auto& e : worked.entries) {
        const double s = pareto_score(e.loss, e.complexity);
        scores.push_back(fmt::format("{:.3f}", s));
        exact = exact && std::abs(s * 1000.0 - std::round(s * 1000.0)) < 1e-9;
    }
    const auto& chosen = select_pareto(worked);
    o.check(exact && scores == std::vector<std::string>{"0.100", "0.157", "0.360"} && chosen.complexity == 3,
            fmt::format("scores {} select C={}", fmt::join(scores, "/"), chosen.complexity));
}

const EnsembleReport& planted_ensemble() {
    static const EnsembleReport r = [] {
        const Dataset ds = planted_independent(2000, kIndependentPlant, 1e-3, derive_seed(kRoot, "acceptance-ensemble"));
        SymregConfig c;
        return ensemble_run(ds, seeds("acceptance-ensemble-seed", 10), c);
    }();
    return r;
}

void ensemble_motifs(Outcome& o) {
    const EnsembleReport& r = planted_ensemble();
    o.check(r.count(Motif::P2) == 10, fmt::format("p2 {}/10", r.count(Motif::P2)));
    o.check(r.count(Motif::Sigma3) >= 9, fmt::format("sigma3 {}/10", r.count(Motif::Sigma3)));
    o.note(fmt::format("median held-out R2 {:.4f}", r.median_r2));
}

void volume(Outcome& o) {
    Stopwatch sw;
    for (double psi : {0.0, 0.4, 0.8}) {
        const PsiData& d = teacher_at(psi, 3);
        const FiveTermCoefficients fit = fit_five_term(d.dataset);
        const auto pts = sample_quintic(ModulusPsi(psi), 20000, derive_seed(kRoot, "acceptance-volume", static_cast<std::uint64_t>(psi * 10)));
        const VolumeReport t = volume_teacher(*d.teacher, pts);
        const VolumeReport f = volume_formula(fit, pts);
        const double rel = std::abs(f.normalized - t.normalized) / t.normalized;
        if (psi == 0.0) {
            const double dev = std::abs(t.normalized - kVolumeReference) / kVolumeReference;
            o.check(dev <= 0.06, fmt::format("teacher volume {:.4f} +- {:.4f} ({:.1f}% of 5/3)", t.normalized,
                                             t.mc_error, t.agreement_pct));
        }
        o.check(rel <= 0.03, fmt::format("psi {} formula/teacher diff {:.2f}%", psi, 100 * rel));
    }
    const double secs = sw.seconds();
    o.check(secs < 600.0, fmt::format("{:.0f} s", secs));
}

void yukawa(Outcome& o) {
    const YukawaReport r = yukawa_fermat_check(ModulusPsi(0.0));
    o.check(r.kappa && *r.kappa == 5.0, fmt::format("kappa111 {}", r.kappa.value_or(NAN)));
}

void statistics(Outcome& o) {
    const Dataset ds = planted_independent(1000, kIndependentPlant, 1e-3, derive_seed(kRoot, "acceptance-perm"));
    for (Feature f : {Feature::P2, Feature::Sigma3}) {
        const auto r = permutation_test(ds, f, 1000, derive_seed(kRoot, "acceptance-perm-shuffle"));
        o.check(r.p_value < 0.001 && r.null_mean() < r.baseline_r2,
                fmt::format("{} p {:.6f} null R2 {:.3f} < {:.4f}", feature_name(f), r.p_value, r.null_mean(),
                            r.baseline_r2));
    }
    const Dataset null_ds = planted_independent(1000, coeffs({0.0, -0.0006, 0.0, -0.075, 0.0}), 1e-3,
                                                derive_seed(kRoot, "acceptance-perm-null"));
    const auto nr = permutation_test(null_ds, Feature::Sigma3, 1000, derive_seed(kRoot, "acceptance-perm-shuffle"));
    o.check(nr.p_value > 0.05, fmt::format("null sigma3 p {:.3f}", nr.p_value));

    const Dataset holdout = planted_independent(2000, kIndependentPlant, 1e-3, derive_seed(kRoot, "acceptance-loso"));
    const LosoResult loso = loso_cv(planted_ensemble(), holdout);
    o.check(loso.mean_nrmse < 0.10 && loso.worst_nrmse < 0.10,
            fmt::format("LOSO NRMSE mean {:.2f}% worst {:.2f}%", 100 * loso.mean_nrmse, 100 * loso.worst_nrmse));
}

struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "exact algebra", exact_algebra},
        {2, "sampling validity", sampling},
        {3, "identity-teacher null", identity_null},
        {4, "gradient correctness", gradient},
        {5, "teacher convergence", teacher_convergence},
        {6, "least-squares oracle", least_squares_oracle},
        {7, "ablation direction", ablation},
        {8, "symbolic regression recovery", symreg_recovery},
        {9, "ensemble motif frequencies", ensemble_motifs},
        {10, "volume benchmark", volume},
        {11, "yukawa", yukawa},
        {12, "statistics", statistics},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome o;
        Stopwatch sw;
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.failed.push_back(std::string("exception: ") + e.what());
            o.notes.push_back(o.failed.back());
        }
        const bool ok = o.failed.empty();
        failures += ok ? 0 : 1;
        fmt::print("{} {:>2} {}: {}", ok ? "PASS" : "FAIL", c.id, c.name, fmt::join(o.notes, "; "));
        if (!ok) fmt::print(" [failed: {}]", fmt::join(o.failed, "; "));
        fmt::print(" ({:.1f} s)\n", sw.seconds());
        std::fflush(stdout);
    }
    if (only.empty() || only.count(13)) {
        fmt::print("SKIP 13 full-scale reproduction: optional (heavy=true, k=10, points=100000 via the CLI)\n");
    }
    return failures == 0 ? 0 : 1;
}
