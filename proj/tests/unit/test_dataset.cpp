#include "cydistill/dataset.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace cyd;

namespace {

Dataset numbered(std::size_t n) {
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) ds.rows.push_back({0.2 + 0.001 * static_cast<double>(i), 0.0, 0.0, static_cast<double>(i), 1.0});
    return ds;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("FS teacher gives a zero target") {
    const ModulusPsi psi(0.0);
    const auto pts = sample_quintic(psi, 500, 3);
    const Dataset ds = build_dataset(TeacherModel::fubini_study(3, psi), pts);
    CHECK(ds.size() == pts.size());
    CHECK(ds.dropped == 0);
    CHECK(ds.teacher_k == 3);
    for (const auto& r : ds.rows) REQUIRE(std::abs(r.y) <= 1e-8);
}

TEST_CASE("stored features match recomputation bit-exactly") {
    const ModulusPsi psi(0.6);
    const auto pts = sample_quintic(psi, 300, 5);
    TrainingConfig c;
    c.iterations = 2;
    c.batches_per_iteration = 5;
    c.batch_size = 200;
    c.validation_points = 500;
    const TeacherModel t = train_balanced_metric(psi, 2, c);
    const Dataset ds = build_dataset(t, pts);
    REQUIRE(ds.size() == pts.size());
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto f = features(pts[i]);
        REQUIRE(ds.rows[i].p2 == f.p2);
        REQUIRE(ds.rows[i].p3 == f.p3);
        REQUIRE(ds.rows[i].sigma3 == f.sigma3);
        REQUIRE(ds.rows[i].weight == pts[i].weight);
        REQUIRE(std::isfinite(ds.rows[i].y));
        mean += ds.rows[i].y;
        sq += ds.rows[i].y * ds.rows[i].y;
    }
    mean /= static_cast<double>(pts.size());
    CHECK(sq / static_cast<double>(pts.size()) - mean * mean > 0.0);
}

TEST_CASE("points from another psi are rejected") {
    const auto pts = sample_quintic(ModulusPsi(0.5), 20, 3);
    CHECK_THROWS_AS(build_dataset(TeacherModel::fubini_study(2, ModulusPsi(0.0)), pts), ValidationError);
}

TEST_CASE("split sizes, determinism and exhaustiveness") {
    const Dataset ds = numbered(100);
    const auto [train, test] = split(ds, 0.8, 9);
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    const auto [train2, test2] = split(ds, 0.8, 9);
    CHECK(train.rows.size() == train2.rows.size());
    bool same = true;
    for (std::size_t i = 0; i < train.size(); ++i) same = same && train.rows[i].y == train2.rows[i].y;
    CHECK(same);

    std::vector<double> all;
    for (const auto& r : train.rows) all.push_back(r.y);
    for (const auto& r : test.rows) all.push_back(r.y);
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == static_cast<double>(i));

    const auto [other, rest] = split(ds, 0.8, 10);
    bool differs = false;
    for (std::size_t i = 0; i < other.size(); ++i) differs = differs || other.rows[i].y != train.rows[i].y;
    CHECK(differs);

    CHECK_THROWS_AS(split(ds, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(split(ds, 1.0, 1), ValidationError);
}

TEST_CASE("subset keeps metadata") {
    Dataset ds = numbered(10);
    ds.teacher_k = 4;
    ds.psi = ModulusPsi(0.4);
    const std::vector<std::size_t> idx{1, 3, 3};
    const Dataset s = subset(ds, idx);
    CHECK(s.size() == 3);
    CHECK(s.rows[2].y == 3.0);
    CHECK(s.teacher_k == 4);
    CHECK(s.psi == ModulusPsi(0.4));
}

}  // TEST_SUITE
