#include "app/pipeline.hpp"

#include "app/digest.hpp"
#include "cydistill/formula.hpp"
#include "cydistill/least_squares.hpp"
#include "cydistill/moduli.hpp"
#include "cydistill/physics.hpp"
#include "cydistill/serialize.hpp"
#include "cydistill/stats.hpp"

#include <fmt/format.h>

#include <memory>
#include <set>

namespace cyd::app {

namespace fs = std::filesystem;

namespace {

std::string psi_tag(double psi) { return "psi" + format_number(psi + 0.0); }

// Data records of a text artifact, header and column line skipped.
std::vector<std::vector<std::string>> records(std::string_view text) {
    std::vector<std::vector<std::string>> out;
    bool columns = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line.front() == '#') continue;
        if (!columns) {
            columns = true;
            continue;
        }
        std::vector<std::string> f;
        std::size_t start = 0;
        while (true) {
            const auto t = line.find('\t', start);
            f.emplace_back(line.substr(start, t == std::string_view::npos ? std::string_view::npos : t - start));
            if (t == std::string_view::npos) break;
            start = t + 1;
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<double> sorted_unique(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

std::map<std::string, std::string> read_stamp(const fs::path& out, std::string_view stage_id) {
    std::map<std::string, std::string> files;
    const fs::path p = out / ".stamps" / (std::string(stage_id) + ".stamp");
    if (!fs::exists(p)) return files;
    const std::string text = read_file(p);
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        std::string_view line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        const auto sp = line.rfind(' ');
        if (sp == std::string_view::npos) continue;
        files.emplace(std::string(line.substr(0, sp)), std::string(line.substr(sp + 1)));
    }
    return files;
}

Pipeline::Pipeline(RunConfig cfg, Log log) : cfg_(std::move(cfg)), log_(std::move(log)) {
    set_thread_count(cfg_.threads);
}

fs::path Pipeline::run(const Stage& stage) {
    if (auto it = done_.find(stage.id); it != done_.end()) return it->second;

    std::vector<std::pair<std::string, std::string>> upstream;
    std::string key_text = fmt::format("stage {}\n{}", stage.id, stage.config);
    for (const auto& in : stage.inputs) {
        const std::string h = sha256_file(cfg_.out / in);
        key_text += fmt::format("input {} {}\n", in.generic_string(), h);
        upstream.emplace_back(in.generic_string(), h);
    }
    const std::string key = sha256_hex(key_text);

    const auto stamp = read_stamp(cfg_.out, stage.id);
    bool fresh = false;
    if (auto it = stamp.find("key"); it != stamp.end() && it->second == key) {
        fresh = true;
        for (const auto& o : stage.outputs) {
            auto f = stamp.find(o.generic_string());
            if (f == stamp.end() || !fs::exists(cfg_.out / o) || sha256_file(cfg_.out / o) != f->second) {
                fresh = false;
                break;
            }
        }
    }

    if (!fresh) {
        if (log_) log_(fmt::format("[{}] running", stage.id));
        Header prov;
        prov.set("stage", stage.id);
        prov.set("config_hash", sha256_hex(stage.config));
        prov.set("seed", std::to_string(cfg_.seed));
        for (const auto& [name, h] : upstream) prov.set("upstream " + name, h);
        stage.body(prov);
        std::string text = fmt::format("key {}\n", key);
        for (const auto& o : stage.outputs) {
            text += fmt::format("{} {}\n", o.generic_string(), sha256_file(cfg_.out / o));
        }
        write_file(cfg_.out / ".stamps" / (stage.id + ".stamp"), text);
    } else if (log_) {
        log_(fmt::format("[{}] up to date", stage.id));
    }
    events_.push_back({stage.id, !fresh});
    const fs::path primary = cfg_.out / stage.outputs.front();
    done_.emplace(stage.id, primary);
    return primary;
}

fs::path Pipeline::points(double psi) {
    const std::string rel = fmt::format("points/{}.tsv", psi_tag(psi));
    Stage s;
    s.id = "sample-" + psi_tag(psi);
    s.config = cfg_.canonical({"seed", "points"}) + fmt::format("psi = {}\n", format_number(psi));
    s.outputs = {rel};
    s.body = [&, psi](const Header& prov) {
        const auto pts = sample_quintic(ModulusPsi(psi), cfg_.points, derive_seed(psi_seed(cfg_.seed, psi), "dataset-points"));
        Header h = prov;
        h.set("psi", format_number(psi));
        write_file(path(rel), points_to_text(pts, h));
    };
    return run(s);
}

fs::path Pipeline::teacher(double psi, int k) {
    const std::string base = fmt::format("teachers/{}-k{}", psi_tag(psi), k);
    Stage s;
    s.id = fmt::format("train-teacher-{}-k{}", psi_tag(psi), k);
    s.config = cfg_.canonical({"seed", "iterations", "batches", "batch_size", "lr", "lr_decay", "decay_every",
                               "validation_points", "heavy"}) +
               fmt::format("psi = {}\nk = {}\n", format_number(psi), k);
    s.outputs = {base + ".tsv", base + ".sigma.tsv"};
    s.body = [&, psi, k, base](const Header& prov) {
        TrainingConfig tc = cfg_.training;
        tc.seed = derive_seed(psi_seed(cfg_.seed, psi), "teacher");
        TrainingTrace trace;
        const TeacherModel model = train_balanced_metric(ModulusPsi(psi), k, tc, &trace);
        write_file(path(base + ".tsv"), teacher_to_text(model, prov));
        write_file(path(base + ".sigma.tsv"), sigma_history_to_text(trace, prov));
    };
    return run(s);
}

fs::path Pipeline::dataset(double psi) {
    const fs::path pts = points(psi);
    const fs::path tch = teacher(psi, cfg_.k);
    const std::string rel = fmt::format("datasets/{}.tsv", psi_tag(psi));
    Stage s;
    s.id = "build-dataset-" + psi_tag(psi);
    s.inputs = {fs::relative(pts, cfg_.out), fs::relative(tch, cfg_.out)};
    s.outputs = {rel};
    s.body = [&, pts, tch, rel](const Header& prov) {
        const auto points = points_from_text(read_file(pts));
        const std::string teacher_text = read_file(tch);
        const TeacherModel model = teacher_from_text(teacher_text);
        Dataset ds = build_dataset(model, points);
        ds.teacher_hash = sha256_hex(teacher_text);
        write_file(path(rel), dataset_to_text(ds, prov));
    };
    return run(s);
}

fs::path Pipeline::symreg() {
    const fs::path data = dataset(cfg_.ref_psi);
    Stage s;
    s.id = "symreg";
    s.config = cfg_.canonical({"seed", "sr_iterations", "sr_population", "sr_max_complexity", "sr_max_rows", "sr_seeds"});
    s.inputs = {fs::relative(data, cfg_.out)};
    s.outputs = {"symreg/ensemble.tsv", "symreg/front.tsv"};
    s.body = [&, data](const Header& prov) {
        const Dataset ds = dataset_from_text(read_file(data));
        std::vector<std::uint64_t> seeds;
        for (int i = 0; i < cfg_.sr_seeds; ++i) seeds.push_back(derive_seed(cfg_.seed, "symreg", static_cast<std::uint64_t>(i)));
        const EnsembleReport report = ensemble_run(ds, seeds, cfg_.symreg);
        write_file(path("symreg/ensemble.tsv"), ensemble_to_text(report, prov));

        const auto [train, test] = split(ds, 0.8, derive_seed(cfg_.seed, "symreg-front-split"));
        SymregConfig sc = cfg_.symreg;
        sc.seed = derive_seed(cfg_.seed, "symreg-front");
        const ParetoFront front = evolve(train, sc);
        std::vector<double> y, w;
        for (const auto& r : train.rows) {
            y.push_back(r.y);
            w.push_back(r.weight);
        }
        Header h = prov;
        h.set("selected", select_pareto(normalized_front(front, weighted_variance(y, w))).tree.to_infix());
        write_file(path("symreg/front.tsv"), front_to_text(front, h));
    };
    return run(s);
}

fs::path Pipeline::fit_formula() {
    const fs::path data = dataset(cfg_.ref_psi);
    Stage s;
    s.id = "fit-formula";
    s.config = cfg_.canonical({"seed", "bootstrap"});
    s.inputs = {fs::relative(data, cfg_.out)};
    s.outputs = {"formula/coefficients.tsv", "formula/ablation.tsv"};
    s.body = [&, data](const Header& prov) {
        const Dataset ds = dataset_from_text(read_file(data));
        const auto [train, test] = split(ds, 0.8, derive_seed(cfg_.seed, "fit-split"));
        FiveTermCoefficients c = fit_five_term(train, &test);
        c.psi = ds.psi.value();
        if (cfg_.bootstrap > 0) c.ci = bootstrap_ci(train, cfg_.bootstrap, 0.95, derive_seed(cfg_.seed, "fit-bootstrap"));
        Header h = prov;
        h.set("train_rows", std::to_string(train.size()));
        h.set("test_rows", std::to_string(test.size()));
        write_file(path("formula/coefficients.tsv"), coefficients_to_text(c, h));
        const std::vector<FitReport> ablation{fit_linear(train, five_term_model(), &test),
                                              fit_linear(train, p2_only_model(), &test),
                                              fit_polynomial_baseline(train, 3, &test)};
        write_file(path("formula/ablation.tsv"), fit_reports_to_text(ablation, h));
    };
    return run(s);
}

fs::path Pipeline::moduli_scan() {
    const auto grid = sorted_unique(cfg_.psis);
    std::map<double, std::string> failed;
    Stage s;
    s.id = "moduli-scan";
    s.config = cfg_.canonical({"seed", "psis", "k", "bootstrap"});
    for (double psi : grid) {
        try {
            s.inputs.push_back(fs::relative(dataset(psi), cfg_.out));
            s.inputs.push_back(fs::relative(teacher(psi, cfg_.k), cfg_.out));
            s.inputs.push_back(fs::relative(points(psi), cfg_.out));
        } catch (const NumericalError& e) {
            failed.emplace(psi, e.what());
            s.config += fmt::format("failed {} {}\n", format_number(psi), e.what());
            if (log_) log_(fmt::format("[moduli-scan] psi {} failed upstream: {}", format_number(psi), e.what()));
        }
    }
    s.outputs = {"moduli/trajectory.tsv", "moduli/error_budget.tsv", "moduli/trajectory_fit.tsv"};
    s.body = [&, grid, failed](const Header& prov) {
        ScanConfig sc;
        sc.psis = grid;
        sc.k = cfg_.k;
        sc.n_points = cfg_.points;
        sc.seed = cfg_.seed;
        sc.training = cfg_.training;
        sc.bootstrap_resamples = cfg_.bootstrap;
        auto provider = [&](ModulusPsi psi, std::uint64_t) {
            if (auto f = failed.find(psi.value()); f != failed.end()) throw NumericalError(f->second);
            PsiData d;
            d.dataset = dataset_from_text(read_file(dataset(psi.value())));
            auto model = std::make_shared<TeacherModel>(teacher_from_text(read_file(teacher(psi.value(), cfg_.k))));
            d.teacher_sigma = model->sigma;
            d.teacher = model;
            d.points = std::make_shared<const std::vector<QuinticPoint>>(points_from_text(read_file(points(psi.value()))));
            return d;
        };
        const CoefficientTrajectory traj = scan_moduli(sc, provider);
        write_file(path("moduli/trajectory.tsv"), trajectory_to_text(traj, prov));
        write_file(path("moduli/error_budget.tsv"), error_budget_to_text(traj, prov));
        std::string fit_text;
        if (traj.psis().size() >= 3) {
            fit_text = trajectory_fit_to_text(linear_fit_trajectory(traj), classify_modulation(traj), prov);
        } else {
            Header h = prov;
            h.set("note", "fewer than three successful psi values; no trajectory fit");
            fit_text = trajectory_fit_to_text({}, {Modulation::Negligible, Modulation::Negligible, Modulation::Negligible,
                                                   Modulation::Negligible, Modulation::Negligible},
                                              h);
        }
        write_file(path("moduli/trajectory_fit.tsv"), fit_text);
    };
    return run(s);
}

fs::path Pipeline::bench_volume() {
    const auto grid = sorted_unique(cfg_.psis);
    Stage s;
    s.id = "bench-volume";
    s.config = cfg_.canonical({"psis"});
    for (double psi : grid) {
        s.inputs.push_back(fs::relative(points(psi), cfg_.out));
        s.inputs.push_back(fs::relative(teacher(psi, cfg_.k), cfg_.out));
        s.inputs.push_back(fs::relative(dataset(psi), cfg_.out));
    }
    s.outputs = {"physics/volume.tsv"};
    s.body = [&, grid](const Header& prov) {
        std::vector<std::pair<std::string, VolumeReport>> rows;
        for (double psi : grid) {
            const auto pts = points_from_text(read_file(points(psi)));
            const TeacherModel model = teacher_from_text(read_file(teacher(psi, cfg_.k)));
            const FiveTermCoefficients c = fit_five_term(dataset_from_text(read_file(dataset(psi))));
            const std::string tag = format_number(psi);
            rows.emplace_back("fubini-study psi=" + tag, volume_fubini_study(pts));
            rows.emplace_back("teacher psi=" + tag, volume_teacher(model, pts));
            rows.emplace_back("formula psi=" + tag, volume_formula(c, pts));
        }
        write_file(path("physics/volume.tsv"), volume_to_text(rows, prov));
    };
    return run(s);
}

fs::path Pipeline::bench_yukawa() {
    Stage s;
    s.id = "bench-yukawa";
    s.config = cfg_.canonical({"psis"});
    s.outputs = {"physics/yukawa.tsv"};
    s.body = [&](const Header& prov) {
        std::vector<YukawaReport> rows;
        for (double psi : sorted_unique(cfg_.psis)) rows.push_back(yukawa_fermat_check(ModulusPsi(psi)));
        write_file(path("physics/yukawa.tsv"), yukawa_to_text(rows, prov));
    };
    return run(s);
}

fs::path Pipeline::validate_stats() {
    const fs::path data = dataset(cfg_.ref_psi);
    const fs::path ens = symreg();
    Stage s;
    s.id = "validate-stats";
    s.config = cfg_.canonical({"seed", "permutations"});
    s.inputs = {fs::relative(data, cfg_.out), fs::relative(ens, cfg_.out)};
    s.outputs = {"stats/permutation.tsv", "stats/loso.tsv", "stats/diagnostics.tsv"};
    s.body = [&, data, ens](const Header& prov) {
        const Dataset ds = dataset_from_text(read_file(data));
        const std::vector<PermutationResult> perm{
            permutation_test(ds, Feature::P2, cfg_.permutations, derive_seed(cfg_.seed, "permutation-p2")),
            permutation_test(ds, Feature::Sigma3, cfg_.permutations, derive_seed(cfg_.seed, "permutation-sigma3"))};
        write_file(path("stats/permutation.tsv"), permutation_to_text(perm, prov));

        const EnsembleReport report = ensemble_from_text(read_file(ens));
        Header lh = prov;
        if (report.members.size() >= 3) {
            write_file(path("stats/loso.tsv"), loso_to_text(loso_cv(report, ds), lh));
        } else {
            lh.set("note", "LOSO needs at least three ensemble seeds");
            write_file(path("stats/loso.tsv"), loso_to_text(LosoResult{}, lh));
        }

        const LinearBasis basis = five_term_model();
        const FitReport fit = fit_linear(ds, basis);
        const std::vector<double> pred = predict(fit, basis, ds);
        std::vector<double> truth, w;
        for (const auto& r : ds.rows) {
            truth.push_back(r.y);
            w.push_back(r.weight);
        }
        write_file(path("stats/diagnostics.tsv"), diagnostics_to_text(residual_diagnostics(pred, truth, w), prov));
    };
    return run(s);
}

fs::path Pipeline::convergence() {
    std::vector<int> ks = cfg_.convergence_ks;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    Stage s;
    s.id = "convergence";
    for (int k : ks) s.inputs.push_back(fs::relative(teacher(cfg_.ref_psi, k), cfg_.out));
    s.outputs = {"convergence.tsv"};
    s.body = [&, ks](const Header& prov) {
        std::string out;
        for (const auto& [k, v] : prov.entries) out += fmt::format("# {}: {}\n", k, v);
        out += fmt::format("# psi: {}\n", format_number(cfg_.ref_psi));
        out += "k\tbasis_size\tsigma_initial\tsigma_final\titerations\n";
        for (int k : ks) {
            const fs::path t = teacher(cfg_.ref_psi, k);
            fs::path sig = t;
            sig.replace_extension(".sigma.tsv");
            const auto hist = records(read_file(sig));
            if (hist.empty()) throw IoError(fmt::format("empty sigma history: {}", sig.string()));
            out += fmt::format("{}\t{}\t{}\t{}\t{}\n", k, basis_size(k), hist.front()[1], hist.back()[1], hist.size() - 1);
        }
        write_file(path("convergence.tsv"), out);
    };
    return run(s);
}

fs::path Pipeline::report() {
    struct Section {
        std::string title;
        fs::path file;
    };
    std::vector<Section> sections;
    for (double psi : sorted_unique(cfg_.psis)) {
        sections.push_back({fmt::format("Teacher sigma history, psi = {}", format_number(psi)),
                            [&] {
                                fs::path p = teacher(psi, cfg_.k);
                                p.replace_extension(".sigma.tsv");
                                return p;
                            }()});
    }
    sections.push_back({"Curvature convergence across k", convergence()});
    sections.push_back({"Five-term coefficients", fit_formula()});
    sections.push_back({"Accuracy vs model complexity", path("formula/ablation.tsv")});
    sections.push_back({"Symbolic regression ensemble", symreg()});
    sections.push_back({"Pareto front", path("symreg/front.tsv")});
    sections.push_back({"Coefficient trajectories", moduli_scan()});
    sections.push_back({"Trajectory fits", path("moduli/trajectory_fit.tsv")});
    sections.push_back({"Error budget", path("moduli/error_budget.tsv")});
    sections.push_back({"Volume", bench_volume()});
    sections.push_back({"Yukawa normalization", bench_yukawa()});
    sections.push_back({"Permutation tests", validate_stats()});
    sections.push_back({"Leave-one-seed-out", path("stats/loso.tsv")});
    sections.push_back({"Residual diagnostics", path("stats/diagnostics.tsv")});

    Stage s;
    s.id = "report";
    s.config = cfg_.canonical({"seed"});
    for (const auto& sec : sections) s.inputs.push_back(fs::relative(sec.file, cfg_.out));
    s.outputs = {"report.md"};
    s.body = [&, sections](const Header& prov) {
        std::string out = "# cydistill run report\n\n";
        out += fmt::format("seed {}, k = {}, {} points per psi, config hash {}\n\n", cfg_.seed, cfg_.k, cfg_.points,
                           prov.require("config_hash"));
        out += "## Provenance\n\n| file | sha256 |\n|---|---|\n";
        for (const auto& [name, h] : prov.entries) {
            if (name.rfind("upstream ", 0) == 0) out += fmt::format("| {} | {} |\n", name.substr(9), h);
        }
        for (const auto& sec : sections) {
            out += fmt::format("\n## {}\n\n`{}`\n\n```\n{}```\n", sec.title,
                               fs::relative(sec.file, cfg_.out).generic_string(), read_file(sec.file));
        }
        write_file(path("report.md"), out);
    };
    return run(s);
}

}  // namespace cyd::app
