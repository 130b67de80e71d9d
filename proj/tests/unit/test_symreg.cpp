#include "cydistill/symreg.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

#include <algorithm>

using namespace cyd;

namespace {

ParetoEntry entry(double loss, std::size_t complexity) {
    std::vector<Node> nodes;
    // a well-formed tree of the requested size: chain of (+ 1 ...) ending in p2
    for (std::size_t i = 0; i + 1 < complexity; i += 2) {
        nodes.push_back({Op::Add, 0.0});
        nodes.push_back({Op::Const, 1.0});
    }
    nodes.push_back({Op::P2, 0.0});
    return {ExpressionTree(nodes), loss, complexity};
}

MotifSet motifs(const char* text) { return detect_motifs(ExpressionTree::parse(text)); }

Dataset planted_p2(std::size_t n, std::uint64_t seed) {
    const auto pts = sample_quintic(ModulusPsi(0.0), n, seed);
    return planted_dataset(pts, ModulusPsi(0.0), [](const FeatureVector& f) { return f.p2; });
}

double best_loss_within(const ParetoFront& f, std::size_t cmax) {
    double best = 1e300;
    for (const auto& e : f.entries)
        if (e.complexity <= cmax) best = std::min(best, e.loss);
    return best;
}

}  // namespace

TEST_SUITE("symreg") {

TEST_CASE("Pareto score worked example") {
    CHECK(pareto_score(0.10, 3) == doctest::Approx(0.100).epsilon(1e-12));
    CHECK(pareto_score(0.01, 15) == doctest::Approx(0.157).epsilon(1e-12));
    CHECK(pareto_score(0.50, 1) == doctest::Approx(0.360).epsilon(1e-12));
    ParetoFront f;
    f.entries = {entry(0.50, 1), entry(0.10, 3), entry(0.01, 15)};
    const auto& s = select_pareto(f);
    CHECK(s.complexity == 3);
    CHECK(s.loss == 0.10);
}

TEST_CASE("select_pareto single entry, ties and empty front") {
    ParetoFront one;
    one.entries = {entry(0.3, 5)};
    CHECK(select_pareto(one).complexity == 5);

    // 0.7 * 0.3 + 0.3 * 1/30 = 0.22 = 0.7 * L + 0.3 * 3/30 for L = 0.19/0.7; nudge L to an exact tie
    const double target = pareto_score(0.3, 1);
    double l = 0.19 / 0.7;
    for (int i = 0; i < 64 && pareto_score(l, 3) != target; ++i) {
        l = std::nextafter(l, pareto_score(l, 3) < target ? 1.0 : 0.0);
    }
    ParetoFront tie;
    tie.entries = {entry(0.3, 1), entry(l, 3)};
    REQUIRE(pareto_score(tie.entries[0].loss, 1) == pareto_score(tie.entries[1].loss, 3));
    CHECK(select_pareto(tie).complexity == 1);

    ParetoFront empty;
    CHECK_THROWS_AS(select_pareto(empty), ValidationError);
}

TEST_CASE("front construction drops dominated entries") {
    const auto f = ParetoFront::from_candidates({entry(0.5, 5), entry(0.1, 3), entry(0.2, 1), entry(0.05, 9),
                                                 entry(0.05, 11), entry(0.3, 3)});
    CHECK(f.is_nondominated());
    std::vector<std::size_t> cs;
    for (const auto& e : f.entries) cs.push_back(e.complexity);
    CHECK(cs == std::vector<std::size_t>{1, 3, 9});
}

TEST_CASE("config validation") {
    SymregConfig c;
    CHECK_NOTHROW(c.validate());
    SymregConfig a = c;
    a.population = 0;
    CHECK_THROWS_AS(a.validate(), ValidationError);
    SymregConfig b = c;
    b.max_complexity = 31;
    CHECK_THROWS_AS(b.validate(), ValidationError);
}

TEST_CASE("planted y = p2 is recovered exactly") {
    const Dataset ds = planted_p2(1000, 1);
    SymregConfig c;
    c.iterations = 40;
    c.seed = 3;
    const ParetoFront f = evolve(ds, c);
    CHECK(f.is_nondominated());
    CHECK(best_loss_within(f, 3) <= 1e-10);
    for (const auto& e : f.entries) CHECK(e.complexity <= 30);
}

TEST_CASE("planted y = 2 p2 + 3 sigma3 is recovered") {
    const auto pts = sample_quintic(ModulusPsi(0.0), 1000, 2);
    const Dataset ds = planted_dataset(pts, ModulusPsi(0.0), [](const FeatureVector& f) { return 2 * f.p2 + 3 * f.sigma3; });
    SymregConfig c;
    c.seed = 11;
    const ParetoFront f = evolve(ds, c);
    CHECK(best_loss_within(f, 9) <= 1e-8);
}

TEST_CASE("evolve is deterministic and independent of the thread count") {
    const Dataset ds = planted_p2(400, 4);
    SymregConfig c;
    c.iterations = 10;
    c.seed = 8;
    set_thread_count(1);
    const ParetoFront a = evolve(ds, c);
    set_thread_count(3);
    const ParetoFront b = evolve(ds, c);
    set_thread_count(0);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].tree == b.entries[i].tree);
        CHECK(a.entries[i].loss == b.entries[i].loss);
    }
}

TEST_CASE("motif detection after algebraic normalization") {
    auto m = motifs("(+ 2 (* 3 p2))");
    CHECK(m.has(Motif::P2));
    CHECK(m.has(Motif::Constant));
    CHECK(!m.has(Motif::Sigma3));

    m = motifs("(/ 0.1 (* p2 p2))");
    CHECK(m.has(Motif::InverseP2));
    CHECK(!m.has(Motif::Constant));

    m = motifs("(/ sigma3 (* p2 (* p2 p2)))");
    CHECK(m.has(Motif::Sigma3OverP2));
    CHECK(m.has(Motif::Sigma3));
    CHECK(!m.has(Motif::InverseP2));

    m = motifs("(* (* 2 p2) p2)");
    CHECK(m.has(Motif::P2Squared));

    m = motifs("(- (+ p2 sigma3) sigma3)");
    CHECK(m.has(Motif::P2));
    CHECK(!m.has(Motif::Sigma3));

    m = motifs("(* 0.5 (- 1 p2))");
    CHECK(m.has(Motif::Constant));
    CHECK(m.has(Motif::P2));

    m = motifs("(+ 1 (log (+ p2 sigma3)))");
    CHECK(m.has(Motif::Constant));
    CHECK(m.has(Motif::P2));
    CHECK(m.has(Motif::Sigma3));
}

TEST_CASE("ensemble on planted y = p2 never uses sigma3") {
    const Dataset ds = planted_p2(800, 6);
    SymregConfig c;
    c.iterations = 30;
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(derive_seed(77, "ensemble", s));
    const EnsembleReport r = ensemble_run(ds, seeds, c);
    CHECK(r.members.size() == 10);
    CHECK(r.count(Motif::P2) == 10);
    CHECK(r.count(Motif::Sigma3) == 0);
    CHECK(r.best_r2 >= r.median_r2);
    CHECK(r.median_r2 >= r.worst_r2);
    for (Motif m : kAllMotifs) CHECK(r.count(m) <= 10);

    const std::vector<std::uint64_t> one{1};
    CHECK_THROWS_AS(ensemble_run(ds, one, c), ValidationError);
}

}  // TEST_SUITE
