#pragma once

#include "cydistill/donaldson.hpp"
#include "cydistill/geometry.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cyd {

/// One regression sample: gauge-invariant features and y = log(det g_alg / det g_FS).
struct RegressionRow {
    double p2 = 0.0;
    double p3 = 0.0;
    double sigma3 = 0.0;
    double y = 0.0;
    double weight = 1.0;
};

struct Dataset {
    std::vector<RegressionRow> rows;
    ModulusPsi psi{0.0};
    int teacher_k = 0;
    std::uint64_t split_seed = 0;
    std::size_t dropped = 0;    // points lost to chart failures
    std::string teacher_hash;   // provenance, filled in by the pipeline

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }
};

/// Maximum tolerated fraction of points dropped to chart failures.
inline constexpr double kMaxDropFraction = 1e-3;

/// Pairs features with the teacher's log-determinant ratio. Points must lie on
/// the teacher's hypersurface (ValidationError otherwise); chart failures are
/// dropped and counted, NumericalError if they exceed kMaxDropFraction.
Dataset build_dataset(const TeacherModel& teacher, std::span<const QuinticPoint> points);

/// Rows built from sampled points with a caller-supplied target.
template <typename Target>
Dataset planted_dataset(std::span<const QuinticPoint> points, ModulusPsi psi, Target&& target) {
    Dataset ds;
    ds.psi = psi;
    ds.rows.reserve(points.size());
    for (const auto& p : points) {
        const FeatureVector f = features(p);
        ds.rows.push_back({f.p2, f.p3, f.sigma3, target(f), p.weight});
    }
    return ds;
}

/// Deterministic disjoint split; train receives round(fraction * n) rows.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Rows selected by index, metadata copied.
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

}  // namespace cyd
