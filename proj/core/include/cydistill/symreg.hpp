#pragma once

// Genetic-programming symbolic regression over (p2, sigma3), Pareto-front
// bookkeeping, the loss/complexity selection rule, and multi-seed ensembles
// with structural motif counting.

#include "cydistill/dataset.hpp"
#include "cydistill/expression.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cyd {

struct SymregConfig {
    int iterations = 200;
    int population = 60;
    int max_complexity = 30;
    int tournament_size = 5;
    double crossover_rate = 0.7;
    double subtree_mutation_rate = 0.2;
    double point_mutation_rate = 0.1;
    double constant_min = -2.0;
    double constant_max = 2.0;
    int constant_steps = 10;   // golden-section steps per constant per generation
    int constant_top = 10;     // individuals refined each generation
    int offspring_lm_steps = 3;  // joint constant fit on every new tree
    int init_max_depth = 3;
    int elites = 1;
    int migrants = 6;  // archive trees reinjected per generation
    /// Cap on rows used for the evolution loss (0 = all); a seeded subsample.
    std::size_t max_rows = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ParetoEntry {
    ExpressionTree tree;
    double loss = 0.0;           // weighted MSE
    std::size_t complexity = 0;  // node count
};

/// Nondominated in (loss, complexity), sorted by complexity ascending.
struct ParetoFront {
    std::vector<ParetoEntry> entries;

    bool is_nondominated() const;
    /// Keeps entries not dominated by any other, sorted by complexity.
    static ParetoFront from_candidates(std::vector<ParetoEntry> candidates);
};

inline constexpr std::size_t kMaxComplexity = 30;

/// 0.7 * loss + 0.3 * complexity / c_max.
double pareto_score(double loss, std::size_t complexity, std::size_t c_max = kMaxComplexity);

/// argmin of pareto_score; ties go to smaller complexity, then lower loss.
/// Throws ValidationError on an empty front.
const ParetoEntry& select_pareto(const ParetoFront& front, std::size_t c_max = kMaxComplexity);

/// Runs the GP and returns the front over every individual evaluated.
/// Deterministic for a fixed config and dataset.
ParetoFront evolve(const Dataset& train, const SymregConfig& cfg);

// ---------------------------------------------------------------------------
// Motifs
// ---------------------------------------------------------------------------

enum class Motif : std::size_t { P2, InverseP2, Sigma3, Sigma3OverP2, P2Squared, Constant };
inline constexpr std::size_t kMotifCount = 6;
inline constexpr std::array<Motif, kMotifCount> kAllMotifs{Motif::P2,         Motif::InverseP2,
                                                           Motif::Sigma3,     Motif::Sigma3OverP2,
                                                           Motif::P2Squared,  Motif::Constant};

std::string_view motif_name(Motif m) noexcept;

struct MotifSet {
    std::array<bool, kMotifCount> present{};
    bool has(Motif m) const noexcept { return present[static_cast<std::size_t>(m)]; }
};

/// Motifs after flattening sums/products into Laurent monomials
/// c * p2^a * sigma3^b. P2 and Sigma3 mean the variable survives anywhere;
/// the rest are term shapes (1/p2^n, sigma3/p2^n, p2^2, constant).
/// log/sqrt subtrees and divisions by non-monomials stay opaque and only
/// contribute variable presence.
MotifSet detect_motifs(const ExpressionTree& tree);

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct EnsembleMember {
    std::uint64_t seed = 0;
    ExpressionTree tree;
    std::size_t complexity = 0;
    double train_loss = 0.0;
    double r2 = 0.0;    // held-out; NaN if the test target is constant
    double rmse = 0.0;  // held-out
    MotifSet motifs;
};

struct EnsembleReport {
    std::vector<EnsembleMember> members;
    std::array<int, kMotifCount> frequency{};
    double best_r2 = 0.0;
    double median_r2 = 0.0;
    double worst_r2 = 0.0;

    int count(Motif m) const noexcept { return frequency[static_cast<std::size_t>(m)]; }
};

/// Per seed: fresh 80/20 split, evolve, then select on the front with the
/// loss expressed relative to the training target variance.
EnsembleReport ensemble_run(const Dataset& ds, std::span<const std::uint64_t> seeds, const SymregConfig& cfg);

/// Front with each loss divided by `variance` (scale-free selection input).
ParetoFront normalized_front(const ParetoFront& front, double variance);

}  // namespace cyd
