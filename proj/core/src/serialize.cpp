#include "cydistill/serialize.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace cyd {

void Header::set(std::string key, std::string value) {
    for (auto& [k, v] : entries) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> Header::get(std::string_view key) const {
    for (const auto& [k, v] : entries) {
        if (k == key) return v;
    }
    return std::nullopt;
}

std::string Header::require(std::string_view key) const {
    auto v = get(key);
    if (!v) throw ValidationError(fmt::format("missing header field '{}'", key));
    return *v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open {} for reading", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError(fmt::format("read failed: {}", path.string()));
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(fmt::format("cannot create directory {}: {}", path.parent_path().string(), ec.message()));
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("cannot open {} for writing", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError(fmt::format("write failed: {}", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw ValidationError(fmt::format("not a number: '{}'", s));
    }
    return v;
}

long long parse_int(std::string_view s) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
        throw ValidationError(fmt::format("not an integer: '{}'", s));
    }
    return v;
}

namespace {

std::string num(double v) { return format_number(v); }

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
        throw ValidationError(fmt::format("not an unsigned integer: '{}'", s));
    }
    return v;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "undefined"; }

void write_header(std::string& out, const Header& h) {
    for (const auto& [k, v] : h.entries) out += fmt::format("# {}: {}\n", k, v);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
        const auto t = line.find('\t', start);
        f.push_back(line.substr(start, t == std::string_view::npos ? std::string_view::npos : t - start));
        if (t == std::string_view::npos) break;
        start = t + 1;
    }
    return f;
}

// Splits into header entries and data records (column line excluded).
struct Parsed {
    Header header;
    std::vector<std::vector<std::string_view>> records;
};

Parsed parse(std::string_view text, std::size_t columns) {
    Parsed p;
    bool saw_columns = false;
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.starts_with("# ")) {
            const auto colon = line.find(": ");
            if (colon == std::string_view::npos) {
                p.header.set(std::string(line.substr(2)), "");
            } else {
                p.header.set(std::string(line.substr(2, colon - 2)), std::string(line.substr(colon + 2)));
            }
            continue;
        }
        if (!saw_columns) {
            saw_columns = true;  // column-name line
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != columns) {
            throw ValidationError(fmt::format("line {}: expected {} fields, got {}", lineno, columns, fields.size()));
        }
        p.records.push_back(std::move(fields));
    }
    return p;
}

}  // namespace

std::string points_to_text(std::span<const QuinticPoint> points, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "re0\tim0\tre1\tim1\tre2\tim2\tre3\tim3\tre4\tim4\taffine\tdependent\tweight\n";
    for (const auto& p : points) {
        for (const auto& z : p.z) out += num(z.real()) + '\t' + num(z.imag()) + '\t';
        out += fmt::format("{}\t{}\t{}\n", p.chart.affine, p.chart.dependent, num(p.weight));
    }
    return out;
}

std::vector<QuinticPoint> points_from_text(std::string_view text, Header* header) {
    auto p = parse(text, 13);
    std::vector<QuinticPoint> out;
    out.reserve(p.records.size());
    for (const auto& r : p.records) {
        QuinticPoint q;
        for (std::size_t i = 0; i < 5; ++i) q.z[i] = Complex{parse_double(r[2 * i]), parse_double(r[2 * i + 1])};
        q.chart.affine = static_cast<int>(parse_int(r[10]));
        q.chart.dependent = static_cast<int>(parse_int(r[11]));
        q.weight = parse_double(r[12]);
        const auto [a, b] = q.chart;
        if (a < 0 || a > 4 || b < 0 || b > 4 || a == b) throw ValidationError("point has an invalid chart");
        out.push_back(q);
    }
    if (header) *header = std::move(p.header);
    return out;
}

std::string teacher_to_text(const TeacherModel& model, const Header& header) {
    Header h = header;
    h.set("k", std::to_string(model.basis.degree()));
    h.set("psi", num(model.psi.value()));
    h.set("sigma", num(model.sigma));
    h.set("basis_size", std::to_string(model.basis.size()));
    std::string out;
    write_header(out, h);
    out += "i\tj\tre\tim\n";
    for (Eigen::Index i = 0; i < model.h.rows(); ++i) {
        for (Eigen::Index j = 0; j < model.h.cols(); ++j) {
            out += fmt::format("{}\t{}\t{}\t{}\n", i, j, num(model.h(i, j).real()), num(model.h(i, j).imag()));
        }
    }
    return out;
}

TeacherModel teacher_from_text(std::string_view text, Header* header) {
    auto p = parse(text, 4);
    const int k = static_cast<int>(parse_int(p.header.require("k")));
    const ModulusPsi psi(parse_double(p.header.require("psi")));
    const auto n = static_cast<Eigen::Index>(parse_int(p.header.require("basis_size")));
    if (static_cast<std::size_t>(n) != basis_size(k)) throw ValidationError("teacher basis_size does not match k");
    if (p.records.size() != static_cast<std::size_t>(n * n)) throw ValidationError("teacher H has the wrong entry count");
    Eigen::MatrixXcd h(n, n);
    for (const auto& r : p.records) {
        const auto i = static_cast<Eigen::Index>(parse_int(r[0]));
        const auto j = static_cast<Eigen::Index>(parse_int(r[1]));
        if (i < 0 || j < 0 || i >= n || j >= n) throw ValidationError("teacher H index out of range");
        h(i, j) = Complex{parse_double(r[2]), parse_double(r[3])};
    }
    TeacherModel m(MonomialBasis(k), std::move(h), psi);
    m.sigma = parse_double(p.header.require("sigma"));
    if (header) *header = std::move(p.header);
    return m;
}

std::string sigma_history_to_text(const TrainingTrace& trace, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "iteration\tsigma\tloss\n";
    for (std::size_t i = 0; i < trace.sigma.size(); ++i) {
        const std::string loss = i == 0 || i > trace.loss.size() ? "-" : num(trace.loss[i - 1]);
        out += fmt::format("{}\t{}\t{}\n", i, num(trace.sigma[i]), loss);
    }
    return out;
}

std::string dataset_to_text(const Dataset& ds, const Header& header) {
    Header h = header;
    h.set("psi", num(ds.psi.value()));
    h.set("k", std::to_string(ds.teacher_k));
    h.set("teacher_hash", ds.teacher_hash.empty() ? "-" : ds.teacher_hash);
    h.set("dropped", std::to_string(ds.dropped));
    h.set("split_seed", std::to_string(ds.split_seed));
    std::string out;
    write_header(out, h);
    out += "p2\tp3\tsigma3\ty\tweight\n";
    for (const auto& r : ds.rows) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\n", num(r.p2), num(r.p3), num(r.sigma3), num(r.y), num(r.weight));
    }
    return out;
}

Dataset dataset_from_text(std::string_view text, Header* header) {
    auto p = parse(text, 5);
    Dataset ds;
    ds.psi = ModulusPsi(parse_double(p.header.require("psi")));
    ds.teacher_k = static_cast<int>(parse_int(p.header.require("k")));
    const auto th = p.header.require("teacher_hash");
    ds.teacher_hash = th == "-" ? "" : th;
    ds.dropped = static_cast<std::size_t>(parse_int(p.header.get("dropped").value_or("0")));
    ds.split_seed = static_cast<std::uint64_t>(parse_int(p.header.get("split_seed").value_or("0")));
    for (const auto& r : p.records) {
        ds.rows.push_back({parse_double(r[0]), parse_double(r[1]), parse_double(r[2]), parse_double(r[3]),
                           parse_double(r[4])});
    }
    if (header) *header = std::move(p.header);
    return ds;
}

std::string front_to_text(const ParetoFront& front, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "complexity\tloss\tscore\ttree\n";
    for (const auto& e : front.entries) {
        out += fmt::format("{}\t{}\t{}\t{}\n", e.complexity, num(e.loss), num(pareto_score(e.loss, e.complexity)),
                           e.tree.to_prefix());
    }
    return out;
}

ParetoFront front_from_text(std::string_view text, Header* header) {
    auto p = parse(text, 4);
    ParetoFront f;
    for (const auto& r : p.records) {
        ParetoEntry e;
        e.tree = ExpressionTree::parse(r[3]);
        e.loss = parse_double(r[1]);
        e.complexity = static_cast<std::size_t>(parse_int(r[0]));
        if (e.complexity != e.tree.complexity()) throw ValidationError("front complexity does not match its tree");
        f.entries.push_back(std::move(e));
    }
    if (header) *header = std::move(p.header);
    return f;
}

std::string ensemble_to_text(const EnsembleReport& report, const Header& header) {
    Header h = header;
    h.set("best_r2", num(report.best_r2));
    h.set("median_r2", num(report.median_r2));
    h.set("worst_r2", num(report.worst_r2));
    for (Motif m : kAllMotifs) {
        h.set(fmt::format("motif {}", motif_name(m)), fmt::format("{}/{}", report.count(m), report.members.size()));
    }
    std::string out;
    write_header(out, h);
    out += "seed\tcomplexity\ttrain_loss\tr2\trmse\tmotifs\ttree\n";
    for (const auto& m : report.members) {
        std::string motifs;
        for (Motif x : kAllMotifs) {
            if (!m.motifs.has(x)) continue;
            if (!motifs.empty()) motifs += ',';
            motifs += motif_name(x);
        }
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", m.seed, m.complexity, num(m.train_loss), num(m.r2),
                           num(m.rmse), motifs.empty() ? "-" : motifs, m.tree.to_prefix());
    }
    return out;
}

EnsembleReport ensemble_from_text(std::string_view text, Header* header) {
    auto p = parse(text, 7);
    EnsembleReport r;
    for (const auto& rec : p.records) {
        EnsembleMember m;
        m.seed = parse_u64(rec[0]);
        m.tree = ExpressionTree::parse(rec[6]);
        m.complexity = static_cast<std::size_t>(parse_int(rec[1]));
        if (m.complexity != m.tree.complexity()) throw ValidationError("ensemble complexity does not match its tree");
        m.train_loss = parse_double(rec[2]);
        m.r2 = parse_double(rec[3]);
        m.rmse = parse_double(rec[4]);
        m.motifs = detect_motifs(m.tree);
        for (Motif x : kAllMotifs) {
            if (m.motifs.has(x)) ++r.frequency[static_cast<std::size_t>(x)];
        }
        r.members.push_back(std::move(m));
    }
    r.best_r2 = parse_double(p.header.require("best_r2"));
    r.median_r2 = parse_double(p.header.require("median_r2"));
    r.worst_r2 = parse_double(p.header.require("worst_r2"));
    if (header) *header = std::move(p.header);
    return r;
}

std::string coefficients_to_text(const FiveTermCoefficients& c, const Header& header) {
    Header h = header;
    h.set("psi", num(c.psi));
    h.set("r2", opt_num(c.r2));
    h.set("rmse", num(c.rmse));
    std::string out;
    write_header(out, h);
    out += "name\tbasis\tvalue\tci_lo\tci_hi\n";
    for (std::size_t i = 0; i < 5; ++i) {
        const std::string lo = c.ci ? num((*c.ci)[i].lo) : "-";
        const std::string hi = c.ci ? num((*c.ci)[i].hi) : "-";
        out += fmt::format("c{}\t{}\t{}\t{}\t{}\n", i, kFiveTermColumns[i], num(c.c[i]), lo, hi);
    }
    return out;
}

FiveTermCoefficients coefficients_from_text(std::string_view text, Header* header) {
    auto p = parse(text, 5);
    if (p.records.size() != 5) throw ValidationError("coefficient file needs exactly five rows");
    FiveTermCoefficients c;
    c.psi = parse_double(p.header.require("psi"));
    const auto r2 = p.header.require("r2");
    if (r2 != "undefined") c.r2 = parse_double(r2);
    c.rmse = parse_double(p.header.require("rmse"));
    std::array<Interval, 5> ci{};
    bool have_ci = true;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& r = p.records[i];
        if (r[0] != fmt::format("c{}", i)) throw ValidationError("coefficient rows out of order");
        c.c[i] = parse_double(r[2]);
        if (r[3] == "-" || r[4] == "-") {
            have_ci = false;
        } else {
            ci[i] = {parse_double(r[3]), parse_double(r[4])};
        }
    }
    if (have_ci) c.ci = ci;
    if (header) *header = std::move(p.header);
    return c;
}

std::string fit_reports_to_text(std::span<const FitReport> reports, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "model\tparameters\tr2\trmse\tresid_mean\tresid_std\tresid_max\tcoefficients\n";
    for (const auto& r : reports) {
        std::string coeffs;
        for (std::size_t i = 0; i < r.params.size(); ++i) {
            if (i) coeffs += ';';
            coeffs += r.columns[i] + '=' + num(r.params[i]);
        }
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.model, r.parameter_count(), opt_num(r.r2),
                           num(r.rmse), num(r.residuals.mean), num(r.residuals.std), num(r.residuals.max_abs), coeffs);
    }
    return out;
}

std::string trajectory_to_text(const CoefficientTrajectory& traj, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "psi\tc0\tc0_ci\tc1\tc1_ci\tc2\tc2_ci\tc3\tc3_ci\tc4\tc4_ci\tteacher_sigma_pct\tr2\trows\tstatus\n";
    for (const auto& p : traj.points) {
        out += num(p.psi);
        for (std::size_t i = 0; i < 5; ++i) {
            out += '\t' + (p.ok ? num(p.coeffs.c[i]) : "-");
            out += '\t' + (p.ok && p.coeffs.ci ? num(0.5 * (*p.coeffs.ci)[i].width()) : "-");
        }
        out += fmt::format("\t{}\t{}\t{}\t{}\n", p.ok ? num(100.0 * p.teacher_sigma) : "-",
                           p.ok ? opt_num(p.coeffs.r2) : "-", p.rows, p.ok ? "ok" : "failed: " + p.error);
    }
    return out;
}

std::string trajectory_fit_to_text(const LinearTrajectoryFit& fit, const std::array<Modulation, 5>& labels,
                                   const Header& header) {
    std::string out;
    write_header(out, header);
    out += "coefficient\tintercept\tslope\tr2\tmodulation\n";
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& f = fit.coeff[i];
        out += fmt::format("c{}\t{}\t{}\t{}\t{}\n", i, num(f.intercept), num(f.slope), opt_num(f.r2),
                           modulation_name(labels[i]));
    }
    return out;
}

std::string error_budget_to_text(const CoefficientTrajectory& traj, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "psi\tteacher_sigma\tstudent_sigma\tdistillation\textrapolation\n";
    for (const auto& p : traj.points) {
        if (!p.ok || !p.budget) continue;
        const auto& b = *p.budget;
        out += fmt::format("{}\t{}\t{}\t{}\t{}\n", num(p.psi), num(b.teacher_sigma), num(b.student_sigma),
                           num(b.distillation), num(b.extrapolation));
    }
    return out;
}

std::string volume_to_text(std::span<const std::pair<std::string, VolumeReport>> rows, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "source\tpoints\traw\tnormalized\tmc_error\treference\tagreement_pct\n";
    for (const auto& [name, v] : rows) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", name, v.points, num(v.raw), num(v.normalized),
                           num(v.mc_error), num(v.reference), num(v.agreement_pct));
    }
    return out;
}

std::string yukawa_to_text(std::span<const YukawaReport> rows, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "psi\tkappa\treference\tflagged\tdisplay_value\tnote\n";
    for (const auto& y : rows) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", num(y.psi), y.kappa ? num(*y.kappa) : "-", num(y.reference),
                           y.flagged ? "yes" : "no", y.display_value ? num(*y.display_value) : "-", y.note);
    }
    return out;
}

std::string permutation_to_text(std::span<const PermutationResult> rows, const Header& header) {
    std::string out;
    write_header(out, header);
    out += "feature\tpermutations\tbaseline_r2\tnull_mean_r2\tp_value\n";
    for (const auto& r : rows) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\n", feature_name(r.feature), r.null_r2.size(), num(r.baseline_r2),
                           num(r.null_mean()), num(r.p_value));
    }
    return out;
}

std::string loso_to_text(const LosoResult& loso, const Header& header) {
    Header h = header;
    h.set("full_r2", num(loso.full_r2));
    h.set("mean_nrmse", num(loso.mean_nrmse));
    h.set("std_nrmse", num(loso.std_nrmse));
    h.set("worst_nrmse", num(loso.worst_nrmse));
    h.set("mean_r2", num(loso.mean_r2));
    std::string out;
    write_header(out, h);
    out += "left_out_seed\tnrmse\tr2\tdelta_r2\n";
    for (const auto& f : loso.folds) {
        out += fmt::format("{}\t{}\t{}\t{}\n", f.left_out, num(f.nrmse), num(f.r2), num(f.delta_r2));
    }
    return out;
}

std::string diagnostics_to_text(const ResidualDiagnostics& d, const Header& header) {
    Header h = header;
    h.set("mean", num(d.mean));
    h.set("std", num(d.std));
    h.set("skewness", num(d.skewness));
    h.set("excess_kurtosis", num(d.excess_kurtosis));
    h.set("q025", num(d.central95.first));
    h.set("q975", num(d.central95.second));
    std::string out;
    write_header(out, h);
    out += "theoretical\tempirical\n";
    for (const auto& q : d.qq) out += fmt::format("{}\t{}\n", num(q.theoretical), num(q.empirical));
    return out;
}

}  // namespace cyd
