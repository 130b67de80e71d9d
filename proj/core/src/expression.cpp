#include "cydistill/expression.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fmt/format.h>

namespace cyd {

namespace {
constexpr double kClamp = 1e300;

double clamp_finite(double v) noexcept {
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, -kClamp, kClamp);
}

double apply(Op op, double a, double b) noexcept {
    switch (op) {
        case Op::Add: return clamp_finite(a + b);
        case Op::Sub: return clamp_finite(a - b);
        case Op::Mul: return clamp_finite(a * b);
        case Op::Div: return clamp_finite(protected_div(a, b));
        case Op::Log: return protected_log(a);
        case Op::Sqrt: return protected_sqrt(a);
        default: return 0.0;
    }
}

const char* op_token(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::P2: return "p2";
        case Op::Sigma3: return "sigma3";
        default: return "";
    }
}
}  // namespace

double protected_div(double num, double den) noexcept {
    if (std::abs(den) < kProtectEps) {
        return num > 0.0 ? kProtectBig : (num < 0.0 ? -kProtectBig : 0.0);
    }
    return num / den;
}

double protected_log(double x) noexcept { return std::log(std::max(x, kProtectEps)); }

double protected_sqrt(double x) noexcept { return std::sqrt(std::min(std::max(x, 0.0), kClamp)); }

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

ExpressionTree::ExpressionTree(std::vector<Node> prefix) : nodes_(std::move(prefix)) {
    if (nodes_.size() > kMaxNodes) throw ValidationError("expression exceeds the node limit");
    long need = 1;
    for (const auto& n : nodes_) {
        if (need <= 0) throw ValidationError("expression has trailing nodes");
        need += arity(n.op) - 1;
    }
    if (need != 0) throw ValidationError("expression is incomplete");
}

ExpressionTree ExpressionTree::constant(double c) { return ExpressionTree({Node{Op::Const, c}}); }

ExpressionTree ExpressionTree::variable(Op var) {
    if (var != Op::P2 && var != Op::Sigma3) throw ValidationError("not a variable op");
    return ExpressionTree({Node{var, 0.0}});
}

ExpressionTree ExpressionTree::unary(Op op, const ExpressionTree& a) {
    std::vector<Node> n{Node{op, 0.0}};
    n.insert(n.end(), a.nodes_.begin(), a.nodes_.end());
    return ExpressionTree(std::move(n));
}

ExpressionTree ExpressionTree::binary(Op op, const ExpressionTree& a, const ExpressionTree& b) {
    std::vector<Node> n{Node{op, 0.0}};
    n.insert(n.end(), a.nodes_.begin(), a.nodes_.end());
    n.insert(n.end(), b.nodes_.begin(), b.nodes_.end());
    return ExpressionTree(std::move(n));
}

std::size_t ExpressionTree::subtree_end(std::size_t i) const noexcept {
    long need = 1;
    std::size_t j = i;
    while (need > 0 && j < nodes_.size()) {
        need += arity(nodes_[j].op) - 1;
        ++j;
    }
    return j;
}

ExpressionTree ExpressionTree::subtree(std::size_t i) const {
    const auto end = subtree_end(i);
    return ExpressionTree(std::vector<Node>(nodes_.begin() + static_cast<std::ptrdiff_t>(i),
                                            nodes_.begin() + static_cast<std::ptrdiff_t>(end)));
}

ExpressionTree ExpressionTree::replaced(std::size_t i, const ExpressionTree& replacement) const {
    const auto end = subtree_end(i);
    std::vector<Node> n(nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(i));
    n.insert(n.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    n.insert(n.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(end), nodes_.end());
    return ExpressionTree(std::move(n));
}

double ExpressionTree::evaluate(double p2, double sigma3) const noexcept {
    // reverse prefix walk with an explicit value stack
    std::array<double, kMaxNodes> stack{};
    std::size_t top = 0;
    for (std::size_t k = nodes_.size(); k-- > 0;) {
        const Node& n = nodes_[k];
        switch (n.op) {
            case Op::Const: stack[top++] = n.value; break;
            case Op::P2: stack[top++] = p2; break;
            case Op::Sigma3: stack[top++] = sigma3; break;
            case Op::Log:
            case Op::Sqrt: stack[top - 1] = apply(n.op, stack[top - 1], 0.0); break;
            default: {
                const double a = stack[top - 1];
                const double b = stack[top - 2];
                top -= 1;
                stack[top - 1] = apply(n.op, a, b);
            }
        }
    }
    return top == 1 ? stack[0] : 0.0;
}

void ExpressionTree::evaluate(std::span<const double> p2, std::span<const double> sigma3,
                              std::span<double> out) const {
    if (p2.size() != sigma3.size() || p2.size() != out.size()) {
        throw ValidationError("ExpressionTree::evaluate: column size mismatch");
    }
    constexpr std::size_t kBlock = 256;
    // column-wise reverse prefix walk over fixed-size row blocks
    std::vector<double> stack;
    for (std::size_t r0 = 0; r0 < p2.size(); r0 += kBlock) {
        const std::size_t m = std::min(kBlock, p2.size() - r0);
        stack.resize(nodes_.size() * kBlock);
        std::size_t top = 0;
        for (std::size_t k = nodes_.size(); k-- > 0;) {
            const Node& n = nodes_[k];
            double* dst = stack.data() + top * kBlock;
            switch (n.op) {
                case Op::Const: std::fill_n(dst, m, n.value); ++top; break;
                case Op::P2: std::copy_n(p2.data() + r0, m, dst); ++top; break;
                case Op::Sigma3: std::copy_n(sigma3.data() + r0, m, dst); ++top; break;
                case Op::Log:
                case Op::Sqrt: {
                    double* a = dst - kBlock;
                    for (std::size_t i = 0; i < m; ++i) a[i] = apply(n.op, a[i], 0.0);
                    break;
                }
                default: {
                    double* a = dst - kBlock;      // first operand
                    double* b = dst - 2 * kBlock;  // second operand, result slot
                    switch (n.op) {
                        case Op::Add: for (std::size_t i = 0; i < m; ++i) b[i] = clamp_finite(a[i] + b[i]); break;
                        case Op::Sub: for (std::size_t i = 0; i < m; ++i) b[i] = clamp_finite(a[i] - b[i]); break;
                        case Op::Mul: for (std::size_t i = 0; i < m; ++i) b[i] = clamp_finite(a[i] * b[i]); break;
                        default:
                            for (std::size_t i = 0; i < m; ++i) b[i] = clamp_finite(protected_div(a[i], b[i]));
                    }
                    --top;
                }
            }
        }
        if (top == 1) {
            std::copy_n(stack.data(), m, out.data() + r0);
        } else {
            std::fill_n(out.data() + r0, m, 0.0);
        }
    }
}

bool ExpressionTree::uses(Op var) const noexcept {
    for (const auto& n : nodes_) {
        if (n.op == var) return true;
    }
    return false;
}

std::size_t ExpressionTree::constant_count() const noexcept {
    std::size_t c = 0;
    for (const auto& n : nodes_) c += n.op == Op::Const ? 1 : 0;
    return c;
}

std::string ExpressionTree::to_prefix() const {
    std::string out;
    std::vector<int> pending;  // remaining children per open paren
    for (const auto& n : nodes_) {
        if (!out.empty() && out.back() != '(') out += ' ';
        if (arity(n.op) > 0) {
            out += '(';
            out += op_token(n.op);
            pending.push_back(arity(n.op));
            continue;
        }
        out += n.op == Op::Const ? format_number(n.value) : op_token(n.op);
        while (!pending.empty() && --pending.back() == 0) {
            out += ')';
            pending.pop_back();
        }
    }
    return out;
}

namespace {
std::string infix_at(const std::vector<Node>& nodes, std::size_t& i) {
    const Node& n = nodes[i++];
    switch (n.op) {
        case Op::Const: return format_number(n.value);
        case Op::P2: return "p2";
        case Op::Sigma3: return "sigma3";
        case Op::Log: return "log(" + infix_at(nodes, i) + ")";
        case Op::Sqrt: return "sqrt(" + infix_at(nodes, i) + ")";
        default: {
            std::string a = infix_at(nodes, i);
            std::string b = infix_at(nodes, i);
            return "(" + a + " " + op_token(n.op) + " " + b + ")";
        }
    }
}

struct Parser {
    std::string_view s;
    std::size_t pos = 0;

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    std::string_view token() {
        skip();
        const std::size_t start = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '(' && s[pos] != ')') ++pos;
        return s.substr(start, pos - start);
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ValidationError(fmt::format("expression parse error at offset {}: {}", pos, what));
    }
    void parse(std::vector<Node>& out) {
        skip();
        if (pos >= s.size()) fail("unexpected end");
        if (s[pos] == '(') {
            ++pos;
            const std::string_view op = token();
            Op code;
            if (op == "+") code = Op::Add;
            else if (op == "-") code = Op::Sub;
            else if (op == "*") code = Op::Mul;
            else if (op == "/") code = Op::Div;
            else if (op == "log") code = Op::Log;
            else if (op == "sqrt") code = Op::Sqrt;
            else fail(fmt::format("unknown operator '{}'", op));
            out.push_back({code, 0.0});
            for (int c = 0; c < arity(code); ++c) parse(out);
            skip();
            if (pos >= s.size() || s[pos] != ')') fail("expected ')'");
            ++pos;
            return;
        }
        const std::string_view t = token();
        if (t == "p2") {
            out.push_back({Op::P2, 0.0});
        } else if (t == "sigma3") {
            out.push_back({Op::Sigma3, 0.0});
        } else {
            double v = 0.0;
            auto res = std::from_chars(t.data(), t.data() + t.size(), v);
            if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
                fail(fmt::format("bad leaf '{}'", t));
            }
            out.push_back({Op::Const, v});
        }
    }
};
}  // namespace

std::string ExpressionTree::to_infix() const {
    if (nodes_.empty()) return "";
    std::size_t i = 0;
    return infix_at(nodes_, i);
}

ExpressionTree ExpressionTree::parse(std::string_view text) {
    Parser p{text};
    std::vector<Node> nodes;
    p.parse(nodes);
    p.skip();
    if (p.pos != text.size()) p.fail("trailing input");
    return ExpressionTree(std::move(nodes));
}

}  // namespace cyd
