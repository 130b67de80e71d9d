#include "cydistill/symreg.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <utility>

namespace cyd {

std::string_view motif_name(Motif m) noexcept {
    switch (m) {
        case Motif::P2: return "p2";
        case Motif::InverseP2: return "1/p2^n";
        case Motif::Sigma3: return "sigma3";
        case Motif::Sigma3OverP2: return "sigma3/p2^n";
        case Motif::P2Squared: return "p2^2";
        case Motif::Constant: return "constant";
    }
    return "?";
}

namespace {

// c * p2^a * sigma3^b, keyed by (a, b)
using Laurent = std::map<std::pair<int, int>, double>;

constexpr std::size_t kMaxTerms = 64;
constexpr int kMaxExponent = 32;

struct Expanded {
    std::optional<Laurent> poly;  // nullopt: opaque
    bool uses_p2 = false;
    bool uses_s3 = false;
};

void add_into(Laurent& out, const Laurent& in, double sign) {
    for (const auto& [e, c] : in) out[e] += sign * c;
}

std::optional<Laurent> multiply(const Laurent& a, const Laurent& b) {
    Laurent out;
    for (const auto& [ea, ca] : a) {
        for (const auto& [eb, cb] : b) {
            const std::pair<int, int> e{ea.first + eb.first, ea.second + eb.second};
            if (std::abs(e.first) > kMaxExponent || std::abs(e.second) > kMaxExponent) return std::nullopt;
            out[e] += ca * cb;
            if (out.size() > kMaxTerms) return std::nullopt;
        }
    }
    return out;
}

// Drops numerically cancelled terms.
void prune(Laurent& p) {
    double scale = 0.0;
    for (const auto& [e, c] : p) scale = std::max(scale, std::abs(c));
    for (auto it = p.begin(); it != p.end();) {
        if (std::abs(it->second) <= 1e-12 * scale || it->second == 0.0) {
            it = p.erase(it);
        } else {
            ++it;
        }
    }
}

Expanded expand(const std::vector<Node>& nodes, std::size_t& i) {
    const Node& n = nodes[i++];
    Expanded out;
    switch (n.op) {
        case Op::Const: out.poly = Laurent{{{0, 0}, n.value}}; return out;
        case Op::P2: out.poly = Laurent{{{1, 0}, 1.0}}; out.uses_p2 = true; return out;
        case Op::Sigma3: out.poly = Laurent{{{0, 1}, 1.0}}; out.uses_s3 = true; return out;
        case Op::Log:
        case Op::Sqrt: {
            Expanded a = expand(nodes, i);
            out.uses_p2 = a.uses_p2;
            out.uses_s3 = a.uses_s3;
            if (a.poly && a.poly->size() == 1 && a.poly->begin()->first == std::pair<int, int>{0, 0}) {
                const double v = a.poly->begin()->second;
                out.poly = Laurent{{{0, 0}, n.op == Op::Log ? protected_log(v) : protected_sqrt(v)}};
            }
            return out;
        }
        default: break;
    }
    Expanded a = expand(nodes, i);
    Expanded b = expand(nodes, i);
    out.uses_p2 = a.uses_p2 || b.uses_p2;
    out.uses_s3 = a.uses_s3 || b.uses_s3;
    if (!a.poly || !b.poly) return out;
    switch (n.op) {
        case Op::Add:
        case Op::Sub: {
            Laurent r = *a.poly;
            add_into(r, *b.poly, n.op == Op::Add ? 1.0 : -1.0);
            prune(r);
            if (r.size() <= kMaxTerms) out.poly = std::move(r);
            break;
        }
        case Op::Mul:
            out.poly = multiply(*a.poly, *b.poly);
            if (out.poly) prune(*out.poly);
            break;
        case Op::Div: {
            prune(*b.poly);
            if (b.poly->size() != 1) break;
            const auto [e, c] = *b.poly->begin();
            if (std::abs(c) < kProtectEps) break;
            out.poly = multiply(*a.poly, Laurent{{{-e.first, -e.second}, 1.0 / c}});
            if (out.poly) prune(*out.poly);
            break;
        }
        default: break;
    }
    return out;
}

void mark_terms(const Laurent& p, MotifSet& m) {
    auto set = [&](Motif x) { m.present[static_cast<std::size_t>(x)] = true; };
    for (const auto& [e, c] : p) {
        const auto [a, b] = e;
        if (a == 0 && b == 0) set(Motif::Constant);
        if (a != 0) set(Motif::P2);
        if (b != 0) set(Motif::Sigma3);
        if (b == 0 && a < 0) set(Motif::InverseP2);
        if (b == 0 && a == 2) set(Motif::P2Squared);
        if (b > 0 && a < 0) set(Motif::Sigma3OverP2);
    }
}

// Splits a top-level sum into addends so one opaque addend does not hide the
// structure of the others.
void collect(const std::vector<Node>& nodes, std::size_t& i, double sign, Laurent& acc, MotifSet& m) {
    const Node& n = nodes[i];
    if (n.op == Op::Add || n.op == Op::Sub) {
        ++i;
        collect(nodes, i, sign, acc, m);
        collect(nodes, i, n.op == Op::Add ? sign : -sign, acc, m);
        return;
    }
    Expanded e = expand(nodes, i);
    if (e.poly) {
        add_into(acc, *e.poly, sign);
        return;
    }
    if (e.uses_p2) m.present[static_cast<std::size_t>(Motif::P2)] = true;
    if (e.uses_s3) m.present[static_cast<std::size_t>(Motif::Sigma3)] = true;
}

}  // namespace

MotifSet detect_motifs(const ExpressionTree& tree) {
    MotifSet m;
    if (tree.empty()) return m;
    Laurent acc;
    std::size_t i = 0;
    collect(tree.nodes(), i, 1.0, acc, m);
    prune(acc);
    mark_terms(acc, m);
    return m;
}

}  // namespace cyd
