#include "cydistill/donaldson.hpp"
#include "cydistill/formula.hpp"
#include "cydistill/geometry.hpp"
#include "cydistill/symreg.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace cyd;

static void BM_SampleQuintic(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sample_quintic(ModulusPsi(0.4), n, ++seed));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleQuintic)->Arg(1000)->Arg(10000);

static void BM_Features(benchmark::State& state) {
    const auto pts = sample_quintic(ModulusPsi(0.0), 4096, 1);
    for (auto _ : state) {
        double s = 0.0;
        for (const auto& p : pts) s += features(p).sigma3;
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_Features);

static void BM_TeacherLogDetRatio(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 256, 2);
    const TeacherModel t = TeacherModel::fubini_study(k, psi);
    for (auto _ : state) {
        double s = 0.0;
        for (const auto& p : pts) s += log_det_ratio(p, t);
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_TeacherLogDetRatio)->DenseRange(2, 4);

static void BM_LossGradient(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 1000, 3);
    const MonomialBasis basis(k);
    const Eigen::MatrixXcd h = fs_equivalent_h(basis, psi);
    for (auto _ : state) benchmark::DoNotOptimize(log_variance_gradient(pts, h, basis, psi, LossReference::Omega));
}
BENCHMARK(BM_LossGradient)->DenseRange(2, 4)->Unit(benchmark::kMillisecond);

static void BM_TreeEvaluate(benchmark::State& state) {
    const auto tree = ExpressionTree::parse("(+ (+ 0.01 (/ 0.0022 (* p2 p2))) (- (* 0.1245 p2) (* 0.05 sigma3)))");
    std::vector<double> p2(4096), s3(4096), out(4096);
    for (std::size_t i = 0; i < p2.size(); ++i) {
        p2[i] = 0.2 + 0.29 * static_cast<double>(i) / 4096.0;
        s3[i] = 0.08 * static_cast<double>(i % 97) / 97.0;
    }
    for (auto _ : state) {
        tree.evaluate(p2, s3, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_TreeEvaluate);

static void BM_FiveTermEvaluate(benchmark::State& state) {
    const auto c = FiveTermCoefficients::fermat_reference();
    for (auto _ : state) {
        double s = 0.0;
        for (int i = 0; i < 4096; ++i) s += eval_five_term(c, 0.2 + 0.00007 * i, 0.00002 * i);
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_FiveTermEvaluate);

BENCHMARK_MAIN();
