#include "app/config.hpp"

#include "cydistill/expression.hpp"
#include "cydistill/geometry.hpp"
#include "cydistill/moduli.hpp"
#include "cydistill/physics.hpp"
#include "cydistill/stats.hpp"
#include "cydistill/serialize.hpp"

#include <fmt/format.h>

#include <functional>

namespace cyd::app {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
std::vector<T> parse_list(std::string_view s, T (*one)(std::string_view)) {
    std::vector<T> out;
    while (true) {
        const auto c = s.find(',');
        out.push_back(one(trim(s.substr(0, c))));
        if (c == std::string_view::npos) break;
        s = s.substr(c + 1);
    }
    return out;
}

double as_double(std::string_view s) { return parse_double(s); }

int as_int(std::string_view s) {
    const long long v = parse_int(s);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw ValidationError(fmt::format("integer out of range: '{}'", s));
    }
    return static_cast<int>(v);
}

std::size_t as_count(std::string_view s) {
    const long long v = parse_int(s);
    if (v < 0) throw ValidationError(fmt::format("expected a non-negative count: '{}'", s));
    return static_cast<std::size_t>(v);
}

bool as_bool(std::string_view s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ValidationError(fmt::format("expected true/false: '{}'", s));
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& f) {
    std::string out;
    for (const auto& x : v) {
        if (!out.empty()) out += ',';
        out += f(x);
    }
    return out;
}

struct Key {
    std::string_view name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
    static const std::vector<Key> table{
        {"seed", [](RunConfig& c, std::string_view v) { c.seed = as_count(v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"psis", [](RunConfig& c, std::string_view v) { c.psis = parse_list(v, as_double); },
         [](const RunConfig& c) { return join(c.psis, format_number); }},
        {"psi", [](RunConfig& c, std::string_view v) { c.psis = {as_double(v)}; c.ref_psi = c.psis[0]; },
         [](const RunConfig& c) { return join(c.psis, format_number); }},
        {"ref_psi", [](RunConfig& c, std::string_view v) { c.ref_psi = as_double(v); },
         [](const RunConfig& c) { return format_number(c.ref_psi); }},
        {"k", [](RunConfig& c, std::string_view v) { c.k = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.k); }},
        {"points", [](RunConfig& c, std::string_view v) { c.points = as_count(v); },
         [](const RunConfig& c) { return std::to_string(c.points); }},
        {"iterations", [](RunConfig& c, std::string_view v) { c.training.iterations = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.training.iterations); }},
        {"batches", [](RunConfig& c, std::string_view v) { c.training.batches_per_iteration = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.training.batches_per_iteration); }},
        {"batch_size", [](RunConfig& c, std::string_view v) { c.training.batch_size = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.training.batch_size); }},
        {"lr", [](RunConfig& c, std::string_view v) { c.training.lr0 = as_double(v); },
         [](const RunConfig& c) { return format_number(c.training.lr0); }},
        {"lr_decay", [](RunConfig& c, std::string_view v) { c.training.lr_decay = as_double(v); },
         [](const RunConfig& c) { return format_number(c.training.lr_decay); }},
        {"decay_every", [](RunConfig& c, std::string_view v) { c.training.decay_every = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.training.decay_every); }},
        {"validation_points", [](RunConfig& c, std::string_view v) { c.training.validation_points = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.training.validation_points); }},
        {"heavy", [](RunConfig& c, std::string_view v) { c.training.heavy = as_bool(v); },
         [](const RunConfig& c) { return std::string(c.training.heavy ? "true" : "false"); }},
        {"sr_iterations", [](RunConfig& c, std::string_view v) { c.symreg.iterations = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.symreg.iterations); }},
        {"sr_population", [](RunConfig& c, std::string_view v) { c.symreg.population = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.symreg.population); }},
        {"sr_max_complexity", [](RunConfig& c, std::string_view v) { c.symreg.max_complexity = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.symreg.max_complexity); }},
        {"sr_max_rows", [](RunConfig& c, std::string_view v) { c.symreg.max_rows = as_count(v); },
         [](const RunConfig& c) { return std::to_string(c.symreg.max_rows); }},
        {"sr_seeds", [](RunConfig& c, std::string_view v) { c.sr_seeds = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.sr_seeds); }},
        {"bootstrap", [](RunConfig& c, std::string_view v) { c.bootstrap = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.bootstrap); }},
        {"permutations", [](RunConfig& c, std::string_view v) { c.permutations = as_int(v); },
         [](const RunConfig& c) { return std::to_string(c.permutations); }},
        {"convergence_ks", [](RunConfig& c, std::string_view v) { c.convergence_ks = parse_list(v, as_int); },
         [](const RunConfig& c) { return join(c.convergence_ks, [](int x) { return std::to_string(x); }); }},
        {"threads", [](RunConfig& c, std::string_view v) { c.threads = static_cast<unsigned>(as_count(v)); },
         [](const RunConfig& c) { return std::to_string(c.threads); }},
        {"out", [](RunConfig& c, std::string_view v) { c.out = std::filesystem::path(std::string(v)); },
         [](const RunConfig& c) { return c.out.string(); }},
    };
    return table;
}

const Key& find_key(std::string_view name) {
    for (const auto& k : keys()) {
        if (k.name == name) return k;
    }
    throw ValidationError(fmt::format("unknown config key '{}'", name));
}

}  // namespace

RunConfig::RunConfig() {
    symreg.iterations = 60;
    symreg.max_rows = 2000;
}

void RunConfig::validate(bool full) const {
    if (psis.empty()) throw ValidationError("psis must not be empty");
    for (double p : psis) (void)ModulusPsi(p);
    (void)ModulusPsi(ref_psi);
    if (points == 0) throw ValidationError("points must be positive");
    training.validate(k);
    for (int ck : convergence_ks) training.validate(ck);
    SymregConfig sr = symreg;
    sr.validate();
    if (sr_seeds < 1) throw ValidationError("sr_seeds must be at least 1");
    if (bootstrap != 0 && bootstrap < 100) throw ValidationError("bootstrap must be 0 or at least 100");
    if (permutations < kMinPermutations) {
        throw ValidationError(fmt::format("permutations must be at least {}", kMinPermutations));
    }
    if (full) {
        if (points < kMinVolumePoints) {
            throw ValidationError(fmt::format("points must be at least {} for the analysis stages (got {})",
                                              kMinVolumePoints, points));
        }
        ScanConfig sc;
        sc.psis = psis;
        sc.k = k;
        sc.n_points = points;
        sc.training = training;
        sc.bootstrap_resamples = bootstrap;
        sc.validate();
    }
}

std::string RunConfig::canonical(std::initializer_list<std::string_view> names) const {
    std::string out;
    for (auto name : names) out += fmt::format("{} = {}\n", name, find_key(name).get(*this));
    return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    try {
        find_key(key).set(cfg, value);
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

RunConfig parse_config(std::string_view text, RunConfig base) {
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (const auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError(fmt::format("config line {}: expected key = value", lineno));
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (value.empty()) throw ValidationError(fmt::format("config line {}: empty value for '{}'", lineno, key));
        apply_setting(base, key, value);
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    return parse_config(read_file(path), std::move(base));
}

std::vector<std::string_view> config_keys() {
    std::vector<std::string_view> out;
    for (const auto& k : keys()) out.push_back(k.name);
    return out;
}

}  // namespace cyd::app
