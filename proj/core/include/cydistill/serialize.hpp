#pragma once

// Text formats for every artifact. Each file starts with "# key: value"
// header lines, then one tab-separated record per line. Doubles use the
// shortest round-trip form, so reading back is bit-exact.

#include "cydistill/dataset.hpp"
#include "cydistill/formula.hpp"
#include "cydistill/moduli.hpp"
#include "cydistill/physics.hpp"
#include "cydistill/stats.hpp"
#include "cydistill/symreg.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cyd {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered metadata lines.
struct Header {
    std::vector<std::pair<std::string, std::string>> entries;

    void set(std::string key, std::string value);
    std::optional<std::string> get(std::string_view key) const;
    /// Throws ValidationError when missing.
    std::string require(std::string_view key) const;
};

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file then renames.
void write_file(const std::filesystem::path& path, std::string_view content);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

// points: re0 im0 ... re4 im4 affine dependent weight
std::string points_to_text(std::span<const QuinticPoint> points, const Header& header = {});
std::vector<QuinticPoint> points_from_text(std::string_view text, Header* header = nullptr);

// teacher: header k, psi, sigma, basis_size; rows "i j re im" of H
std::string teacher_to_text(const TeacherModel& model, const Header& header = {});
TeacherModel teacher_from_text(std::string_view text, Header* header = nullptr);
std::string sigma_history_to_text(const TrainingTrace& trace, const Header& header = {});

// dataset: p2 p3 sigma3 y weight
std::string dataset_to_text(const Dataset& ds, const Header& header = {});
Dataset dataset_from_text(std::string_view text, Header* header = nullptr);

// front: complexity loss prefix-tree
std::string front_to_text(const ParetoFront& front, const Header& header = {});
ParetoFront front_from_text(std::string_view text, Header* header = nullptr);

std::string ensemble_to_text(const EnsembleReport& report, const Header& header = {});
/// Motif flags and frequencies are recomputed from the trees.
EnsembleReport ensemble_from_text(std::string_view text, Header* header = nullptr);

std::string coefficients_to_text(const FiveTermCoefficients& c, const Header& header = {});
FiveTermCoefficients coefficients_from_text(std::string_view text, Header* header = nullptr);

std::string fit_reports_to_text(std::span<const FitReport> reports, const Header& header = {});

std::string trajectory_to_text(const CoefficientTrajectory& traj, const Header& header = {});
std::string trajectory_fit_to_text(const LinearTrajectoryFit& fit, const std::array<Modulation, 5>& labels,
                                   const Header& header = {});
std::string error_budget_to_text(const CoefficientTrajectory& traj, const Header& header = {});

std::string volume_to_text(std::span<const std::pair<std::string, VolumeReport>> rows, const Header& header = {});
std::string yukawa_to_text(std::span<const YukawaReport> rows, const Header& header = {});

std::string permutation_to_text(std::span<const PermutationResult> rows, const Header& header = {});
std::string loso_to_text(const LosoResult& loso, const Header& header = {});
std::string diagnostics_to_text(const ResidualDiagnostics& d, const Header& header = {});

}  // namespace cyd
