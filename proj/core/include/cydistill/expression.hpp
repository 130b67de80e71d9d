#pragma once

// Expression trees over (p2, sigma3) with the operator set {+, -, *, /, log, sqrt}.
//
// Trees are stored as a prefix-order node array. The canonical text form is
// parenthesized prefix notation:
//
//   expr   := leaf | "(" binop expr expr ")" | "(" unop expr ")"
//   leaf   := number | "p2" | "sigma3"
//   binop  := "+" | "-" | "*" | "/"
//   unop   := "log" | "sqrt"
//
// e.g. "(+ (* 2 p2) (* 3 sigma3))". Numbers use shortest round-trip form.

#include "cydistill/common.hpp"
#include "cydistill/geometry.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cyd {

enum class Op : std::uint8_t { Add, Sub, Mul, Div, Log, Sqrt, Const, P2, Sigma3 };

constexpr int arity(Op op) noexcept {
    switch (op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Log:
        case Op::Sqrt: return 1;
        default: return 0;
    }
}

struct Node {
    Op op = Op::Const;
    double value = 0.0;  // used by Op::Const
    friend bool operator==(const Node&, const Node&) = default;
};

/// Hard cap on stored trees (search trees stay far below it).
inline constexpr std::size_t kMaxNodes = 256;

/// Protected primitives: total on all finite inputs.
inline constexpr double kProtectEps = 1e-9;
inline constexpr double kProtectBig = 1e9;
double protected_div(double num, double den) noexcept;
double protected_log(double x) noexcept;
double protected_sqrt(double x) noexcept;

class ExpressionTree {
public:
    ExpressionTree() = default;
    /// Throws ValidationError unless nodes form exactly one well-formed prefix tree.
    explicit ExpressionTree(std::vector<Node> prefix);

    static ExpressionTree constant(double c);
    static ExpressionTree variable(Op var);
    static ExpressionTree unary(Op op, const ExpressionTree& a);
    static ExpressionTree binary(Op op, const ExpressionTree& a, const ExpressionTree& b);

    /// Parses the canonical prefix form; throws ValidationError on bad input.
    static ExpressionTree parse(std::string_view text);

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::vector<Node>& mutable_nodes() noexcept { return nodes_; }

    /// Operators plus operands.
    std::size_t complexity() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }

    /// One past the last node of the subtree rooted at i.
    std::size_t subtree_end(std::size_t i) const noexcept;
    ExpressionTree subtree(std::size_t i) const;
    /// Copy with the subtree at i replaced by `replacement`.
    ExpressionTree replaced(std::size_t i, const ExpressionTree& replacement) const;

    double evaluate(double p2, double sigma3) const noexcept;
    double evaluate(const FeatureVector& f) const noexcept { return evaluate(f.p2, f.sigma3); }
    /// Column-wise evaluation; out.size() must equal p2.size().
    void evaluate(std::span<const double> p2, std::span<const double> sigma3, std::span<double> out) const;

    bool uses(Op var) const noexcept;
    std::size_t constant_count() const noexcept;

    std::string to_prefix() const;
    std::string to_infix() const;

    friend bool operator==(const ExpressionTree&, const ExpressionTree&) = default;

private:
    std::vector<Node> nodes_;
};

std::string format_number(double v);

}  // namespace cyd
