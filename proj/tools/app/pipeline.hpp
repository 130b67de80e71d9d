#pragma once

// Make-like stage runner. A stage reruns when its key (stage id, the config
// keys it reads, upstream file hashes) differs from its stamp or one of its
// outputs is missing or altered; otherwise it is skipped.

#include "app/config.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cyd {
struct Header;
}

namespace cyd::app {

struct StageEvent {
    std::string id;
    bool ran = false;
};

class Pipeline {
public:
    using Log = std::function<void(std::string_view)>;

    explicit Pipeline(RunConfig cfg, Log log = {});

    const RunConfig& config() const noexcept { return cfg_; }
    const std::vector<StageEvent>& events() const noexcept { return events_; }

    // Each call brings the stage and everything upstream up to date and
    // returns its primary output.
    std::filesystem::path points(double psi);
    std::filesystem::path teacher(double psi, int k);
    std::filesystem::path dataset(double psi);
    std::filesystem::path symreg();
    std::filesystem::path fit_formula();
    std::filesystem::path moduli_scan();
    std::filesystem::path bench_volume();
    std::filesystem::path bench_yukawa();
    std::filesystem::path validate_stats();
    std::filesystem::path convergence();
    std::filesystem::path report();

    std::filesystem::path path(std::string_view rel) const { return cfg_.out / std::filesystem::path(rel); }

private:
    struct Stage {
        std::string id;
        std::string config;                        // canonical text of the keys it reads
        std::vector<std::filesystem::path> inputs;   // relative to out
        std::vector<std::filesystem::path> outputs;  // relative to out
        std::function<void(const Header&)> body;
    };

    std::filesystem::path run(const Stage& stage);

    RunConfig cfg_;
    Log log_;
    std::vector<StageEvent> events_;
    std::map<std::string, std::filesystem::path, std::less<>> done_;
};

/// Files of a finished stage stamp: relative path -> sha256.
std::map<std::string, std::string> read_stamp(const std::filesystem::path& out, std::string_view stage_id);

}  // namespace cyd::app
