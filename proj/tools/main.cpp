#include "app/config.hpp"
#include "app/pipeline.hpp"
#include "cydistill/serialize.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <functional>
#include <optional>

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kNumerical = 3 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool heavy = false;
    std::vector<std::string> set;
    bool quiet = false;
};

cyd::app::RunConfig resolve(const Options& o) {
    cyd::app::RunConfig cfg;
    if (!o.config.empty()) cfg = cyd::app::load_config(o.config);
    for (const auto& kv : o.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw cyd::ValidationError(fmt::format("--set expects key=value, got '{}'", kv));
        cyd::app::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (o.heavy) cfg.training.heavy = true;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Teacher metrics, symbolic distillation and validation on the Dwork quintic"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", opt.seed, "root seed (overrides the config)");
    app.add_option("--out", opt.out, "output directory (overrides the config)");
    app.add_flag("--heavy", opt.heavy, "allow teacher degree k >= 6");
    app.add_option("--set", opt.set, "extra key=value settings, applied after the config file");
    app.add_flag("-q,--quiet", opt.quiet, "no stage log on stderr");

    using cyd::app::Pipeline;
    struct Command {
        const char* name;
        const char* help;
        bool full;  // needs the analysis-stage checks
        std::function<void(Pipeline&)> run;
    };
    const std::vector<Command> commands{
        {"sample", "sample points on X_psi for every psi", false,
         [](Pipeline& p) { for (double psi : p.config().psis) p.points(psi); }},
        {"train-teacher", "train the algebraic teacher for every psi", false,
         [](Pipeline& p) { for (double psi : p.config().psis) p.teacher(psi, p.config().k); }},
        {"build-dataset", "pair features with teacher targets for every psi", false,
         [](Pipeline& p) { for (double psi : p.config().psis) p.dataset(psi); }},
        {"symreg", "symbolic-regression ensemble at ref_psi", false, [](Pipeline& p) { p.symreg(); }},
        {"fit-formula", "five-term fit and ablation at ref_psi", false, [](Pipeline& p) { p.fit_formula(); }},
        {"moduli-scan", "coefficient trajectories over psis", true, [](Pipeline& p) { p.moduli_scan(); }},
        {"bench-volume", "Monte Carlo volumes", true, [](Pipeline& p) { p.bench_volume(); }},
        {"bench-yukawa", "Fermat-point Yukawa normalization", false, [](Pipeline& p) { p.bench_yukawa(); }},
        {"validate-stats", "permutation tests, LOSO and residual diagnostics", false,
         [](Pipeline& p) { p.validate_stats(); }},
        {"pipeline", "every stage, then the report", true, [](Pipeline& p) { p.report(); }},
        {"report", "summary of every table", true, [](Pipeline& p) { p.report(); }},
    };
    const Command* chosen = nullptr;
    for (const auto& c : commands) {
        app.add_subcommand(c.name, c.help)->callback([&chosen, &c] { chosen = &c; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    std::string where;
    try {
        const auto cfg = resolve(opt);
        cfg.validate(chosen->full);
        Pipeline pipeline(cfg, opt.quiet ? Pipeline::Log{} : Pipeline::Log{[](std::string_view m) {
            std::fputs(fmt::format("{}\n", m).c_str(), stderr);
        }});
        chosen->run(pipeline);
        if (!opt.quiet) std::fputs(fmt::format("outputs in {}\n", cfg.out.string()).c_str(), stderr);
        return kOk;
    } catch (const cyd::ValidationError& e) {
        std::fputs(fmt::format("validation error: {}\n", e.what()).c_str(), stderr);
        return kValidation;
    } catch (const cyd::NumericalError& e) {
        std::fputs(fmt::format("numerical failure: {}\n", e.what()).c_str(), stderr);
        return kNumerical;
    } catch (const cyd::IoError& e) {
        std::fputs(fmt::format("i/o error: {}\n", e.what()).c_str(), stderr);
        return kFailure;
    } catch (const std::exception& e) {
        std::fputs(fmt::format("error: {}\n", e.what()).c_str(), stderr);
        return kFailure;
    }
}
