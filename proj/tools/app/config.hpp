#pragma once

#include "cydistill/donaldson.hpp"
#include "cydistill/symreg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cyd::app {

struct RunConfig {
    std::uint64_t seed = 1;
    std::vector<double> psis{0.0, 0.2, 0.4, 0.6, 0.8};
    double ref_psi = 0.0;  // symreg, fit-formula and validate-stats work here
    int k = 3;
    std::size_t points = 10000;
    TrainingConfig training;
    SymregConfig symreg;
    int sr_seeds = 10;
    int bootstrap = 200;
    int permutations = 1000;
    std::vector<int> convergence_ks{2, 3};
    unsigned threads = 0;
    std::filesystem::path out = "run";

    RunConfig();

    /// Module preconditions checkable before any work starts. full adds the
    /// analysis stages (moduli range, volume point count).
    void validate(bool full) const;

    /// "key = value" lines for the named keys, in the given order.
    std::string canonical(std::initializer_list<std::string_view> keys) const;
};

/// Sets one key from its text form. Unknown keys and bad values throw
/// ValidationError.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses "key = value" lines; '#' starts a comment.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

std::vector<std::string_view> config_keys();

}  // namespace cyd::app
