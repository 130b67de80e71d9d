#include "cydistill/dataset.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numeric>

namespace cyd {

Dataset build_dataset(const TeacherModel& teacher, std::span<const QuinticPoint> points) {
    if (points.empty()) throw ValidationError("build_dataset: no points");
    Dataset ds;
    ds.psi = teacher.psi;
    ds.teacher_k = teacher.basis.degree();
    ds.rows.reserve(points.size());
    for (const auto& p : points) {
        if (!(std::abs(quintic_eval(p.z, teacher.psi)) <= 1e3 * kQuinticTolerance)) {
            throw ValidationError(fmt::format(
                "build_dataset: point not on the psi = {} hypersurface (|Q| = {:.3e})",
                teacher.psi.value(), std::abs(quintic_eval(p.z, teacher.psi))));
        }
        double y = 0.0;
        try {
            y = log_det_ratio(p, teacher);
        } catch (const ChartError&) {
            ++ds.dropped;
            continue;
        }
        if (!std::isfinite(y)) throw NumericalError("build_dataset: non-finite target");
        const FeatureVector f = features(p);
        ds.rows.push_back({f.p2, f.p3, f.sigma3, y, p.weight});
    }
    if (static_cast<double>(ds.dropped) >= kMaxDropFraction * static_cast<double>(points.size()) &&
        ds.dropped > 0) {
        throw NumericalError(fmt::format("build_dataset: {} of {} points dropped to chart failures",
                                         ds.dropped, points.size()));
    }
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError(fmt::format("split fraction must lie in (0, 1), got {}", train_fraction));
    }
    if (ds.empty()) throw ValidationError("split: empty dataset");
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Stream rng(seed, "split", 0);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);

    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.size())));
    std::span<const std::size_t> all(idx);
    Dataset train = subset(ds, all.first(n_train));
    Dataset test = subset(ds, all.subspan(n_train));
    train.split_seed = test.split_seed = seed;
    return {std::move(train), std::move(test)};
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
    Dataset out;
    out.psi = ds.psi;
    out.teacher_k = ds.teacher_k;
    out.split_seed = ds.split_seed;
    out.teacher_hash = ds.teacher_hash;
    out.rows.reserve(indices.size());
    for (std::size_t i : indices) out.rows.push_back(ds.rows.at(i));
    return out;
}

}  // namespace cyd
