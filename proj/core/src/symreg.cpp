#include "cydistill/symreg.hpp"

#include "cydistill/least_squares.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>
#include <optional>

namespace cyd {

void SymregConfig::validate() const {
    if (iterations < 1 || population < 2 || max_complexity < 1 || tournament_size < 1 || constant_top < 0 ||
        constant_steps < 0 || offspring_lm_steps < 0 || init_max_depth < 1 || elites < 0 || elites >= population || migrants < 0) {
        throw ValidationError("symreg: invalid counts in config");
    }
    if (crossover_rate < 0 || subtree_mutation_rate < 0 || point_mutation_rate < 0 ||
        crossover_rate + subtree_mutation_rate + point_mutation_rate <= 0) {
        throw ValidationError("symreg: operator rates must be nonnegative and not all zero");
    }
    if (!(constant_min < constant_max)) throw ValidationError("symreg: empty constant range");
    if (static_cast<std::size_t>(max_complexity) > kMaxComplexity) {
        throw ValidationError(fmt::format("symreg: max_complexity above {}", kMaxComplexity));
    }
}

double pareto_score(double loss, std::size_t complexity, std::size_t c_max) {
    return 0.7 * loss + 0.3 * static_cast<double>(complexity) / static_cast<double>(c_max);
}

const ParetoEntry& select_pareto(const ParetoFront& front, std::size_t c_max) {
    if (front.entries.empty()) throw ValidationError("select_pareto: empty front");
    const ParetoEntry* best = &front.entries.front();
    double best_score = pareto_score(best->loss, best->complexity, c_max);
    for (const auto& e : front.entries) {
        const double s = pareto_score(e.loss, e.complexity, c_max);
        const bool better = s < best_score ||
                            (s == best_score && (e.complexity < best->complexity ||
                                                 (e.complexity == best->complexity && e.loss < best->loss)));
        if (better) {
            best = &e;
            best_score = s;
        }
    }
    return *best;
}

bool ParetoFront::is_nondominated() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i > 0 && entries[i].complexity < entries[i - 1].complexity) return false;
        for (std::size_t j = 0; j < entries.size(); ++j) {
            if (i == j) continue;
            const auto& a = entries[j];
            const auto& b = entries[i];
            if (a.loss <= b.loss && a.complexity <= b.complexity && (a.loss < b.loss || a.complexity < b.complexity)) {
                return false;
            }
        }
    }
    return true;
}

ParetoFront ParetoFront::from_candidates(std::vector<ParetoEntry> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const ParetoEntry& a, const ParetoEntry& b) {
        return a.complexity != b.complexity ? a.complexity < b.complexity : a.loss < b.loss;
    });
    ParetoFront front;
    double best = std::numeric_limits<double>::infinity();
    for (auto& c : candidates) {
        if (!std::isfinite(c.loss)) continue;
        if (c.loss < best) {
            best = c.loss;
            front.entries.push_back(std::move(c));
        }
    }
    return front;
}

ParetoFront normalized_front(const ParetoFront& front, double variance) {
    ParetoFront out = front;
    if (variance > 0.0) {
        for (auto& e : out.entries) e.loss /= variance;
    }
    return out;
}

namespace {

struct Columns {
    std::vector<double> p2, s3, y, w;  // w sums to 1
};

Columns make_columns(const Dataset& ds, const SymregConfig& cfg) {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (cfg.max_rows > 0 && ds.size() > cfg.max_rows) {
        Stream rng(cfg.seed, "symreg-rows", 0);
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        idx.resize(cfg.max_rows);
        std::sort(idx.begin(), idx.end());
    }
    Columns c;
    double wsum = 0.0;
    for (std::size_t i : idx) {
        const auto& r = ds.rows[i];
        c.p2.push_back(r.p2);
        c.s3.push_back(r.sigma3);
        c.y.push_back(r.y);
        c.w.push_back(r.weight);
        wsum += r.weight;
    }
    for (double& w : c.w) w /= wsum;
    return c;
}

struct Individual {
    ExpressionTree tree;
    double loss = std::numeric_limits<double>::infinity();
    int refine_level = 0;
};

class Engine {
public:
    Engine(const Columns& data, const SymregConfig& cfg)
        : data_(data), cfg_(cfg), rng_(cfg.seed, "symreg", 0),
          archive_(static_cast<std::size_t>(cfg.max_complexity) + 1) {}

    ParetoFront run() {
        std::vector<Individual> pop;
        pop.reserve(static_cast<std::size_t>(cfg_.population));
        for (int i = 0; i < cfg_.population; ++i) {
            const int depth = 1 + (i / 2) % cfg_.init_max_depth;
            pop.push_back(make_individual(random_tree(depth, i % 2 == 0)));
        }
        for (int gen = 0; gen < cfg_.iterations; ++gen) {
            sort_by_loss(pop);
            const auto top = std::min<std::size_t>(static_cast<std::size_t>(cfg_.constant_top), pop.size());
            for (std::size_t i = 0; i < top; ++i) optimize_constants(pop[i]);
            sort_by_loss(pop);

            std::vector<Individual> next(pop.begin(), pop.begin() + cfg_.elites);
            const double total = cfg_.crossover_rate + cfg_.subtree_mutation_rate + cfg_.point_mutation_rate;
            while (next.size() < pop.size()) {
                const double r = rng_.uniform() * total;
                if (r < cfg_.crossover_rate) {
                    next.push_back(make_individual(crossover(tournament(pop).tree, tournament(pop).tree)));
                } else if (r < cfg_.crossover_rate + cfg_.subtree_mutation_rate) {
                    next.push_back(make_individual(subtree_mutation(tournament(pop).tree)));
                } else {
                    next.push_back(make_individual(point_mutation(tournament(pop).tree)));
                }
            }
            migrate(next);
            pop = std::move(next);
        }
        for (auto& ind : pop) record(ind.tree, ind.loss);

        std::vector<ParetoEntry> candidates;
        for (auto& slot : archive_) {
            if (slot) candidates.push_back(*slot);
        }
        return ParetoFront::from_candidates(std::move(candidates));
    }

private:
    double loss_of(const ExpressionTree& t) {
        buffer_.resize(data_.y.size());
        t.evaluate(data_.p2, data_.s3, buffer_);
        double s = 0.0;
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            const double d = buffer_[i] - data_.y[i];
            s += data_.w[i] * d * d;
        }
        return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
    }

    void record(const ExpressionTree& t, double loss) {
        if (!std::isfinite(loss)) return;
        const std::size_t c = t.complexity();
        if (c >= archive_.size()) return;
        auto& slot = archive_[c];
        if (!slot || loss < slot->loss) slot = ParetoEntry{t, loss, c};
    }

    Individual make_individual(ExpressionTree t) {
        Individual ind;
        fit_constants(t, cfg_.offspring_lm_steps);
        ind.loss = loss_of(t);
        affine_wrap(t, ind.loss);
        record(t, ind.loss);
        ind.tree = std::move(t);
        return ind;
    }

    static void sort_by_loss(std::vector<Individual>& pop) {
        std::stable_sort(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
            return a.loss != b.loss ? a.loss < b.loss : a.tree.complexity() < b.tree.complexity();
        });
    }

    // Losses within 1% count as tied; the smaller tree then wins.
    static bool fitter(const Individual& a, const Individual& b) {
        const double scale = std::max(a.loss, b.loss);
        if (std::abs(a.loss - b.loss) > 0.01 * scale) return a.loss < b.loss;
        if (a.tree.complexity() != b.tree.complexity()) return a.tree.complexity() < b.tree.complexity();
        return a.loss < b.loss;
    }

    const Individual& tournament(const std::vector<Individual>& pop) {
        const Individual* best = nullptr;
        for (int i = 0; i < cfg_.tournament_size; ++i) {
            const Individual& c = pop[rng_.below(pop.size())];
            if (!best || fitter(c, *best)) best = &c;
        }
        return *best;
    }

    // Reinjects archived (best-per-complexity) trees over the tail of the
    // new generation.
    void migrate(std::vector<Individual>& next) {
        std::vector<const ParetoEntry*> slots;
        for (const auto& a : archive_) {
            if (a) slots.push_back(&*a);
        }
        if (slots.empty()) return;
        const std::size_t count = std::min(static_cast<std::size_t>(cfg_.migrants), next.size() - static_cast<std::size_t>(cfg_.elites));
        for (std::size_t i = 0; i < count; ++i) {
            const ParetoEntry& e = *slots[rng_.below(slots.size())];
            Individual ind;
            ind.tree = e.tree;
            ind.loss = e.loss;
            next[next.size() - 1 - i] = std::move(ind);
        }
    }

    Node random_leaf() {
        const double r = rng_.uniform();
        if (r < 1.0 / 3.0) return {Op::Const, cfg_.constant_min + rng_.uniform() * (cfg_.constant_max - cfg_.constant_min)};
        return {r < 2.0 / 3.0 ? Op::P2 : Op::Sigma3, 0.0};
    }

    Op random_function() {
        static constexpr std::array<Op, 6> ops{Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Log, Op::Sqrt};
        return ops[rng_.below(ops.size())];
    }

    void grow(int depth, bool full, std::vector<Node>& out) {
        const bool leaf = depth <= 0 || (!full && rng_.uniform() < 0.3);
        if (leaf) {
            out.push_back(random_leaf());
            return;
        }
        const Op op = random_function();
        out.push_back({op, 0.0});
        for (int c = 0; c < arity(op); ++c) grow(depth - 1, full, out);
    }

    ExpressionTree random_tree(int depth, bool full) {
        for (int attempt = 0; attempt < 20; ++attempt) {
            std::vector<Node> nodes;
            grow(depth, full, nodes);
            if (nodes.size() <= static_cast<std::size_t>(cfg_.max_complexity)) return ExpressionTree(std::move(nodes));
        }
        return ExpressionTree({random_leaf()});
    }

    bool fits(const ExpressionTree& t) const {
        return t.complexity() <= static_cast<std::size_t>(cfg_.max_complexity);
    }

    ExpressionTree crossover(const ExpressionTree& a, const ExpressionTree& b) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            const std::size_t i = rng_.below(a.complexity());
            const std::size_t j = rng_.below(b.complexity());
            ExpressionTree child = a.replaced(i, b.subtree(j));
            if (fits(child)) return child;
        }
        return a;
    }

    ExpressionTree subtree_mutation(const ExpressionTree& a) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            const std::size_t i = rng_.below(a.complexity());
            ExpressionTree child = a.replaced(i, random_tree(1 + static_cast<int>(rng_.below(3)), false));
            if (fits(child)) return child;
        }
        return a;
    }

    ExpressionTree point_mutation(const ExpressionTree& a) {
        ExpressionTree child = a;
        auto& nodes = child.mutable_nodes();
        Node& n = nodes[rng_.below(nodes.size())];
        switch (arity(n.op)) {
            case 0:
                if (n.op == Op::Const && rng_.uniform() < 0.5) {
                    n.value += 0.1 * std::max(std::abs(n.value), 1.0) * rng_.normal();
                } else {
                    n = random_leaf();
                }
                break;
            case 1: n.op = n.op == Op::Log ? Op::Sqrt : Op::Log; break;
            default: {
                static constexpr std::array<Op, 4> bin{Op::Add, Op::Sub, Op::Mul, Op::Div};
                n.op = bin[rng_.below(bin.size())];
            }
        }
        return child;
    }

    // Replaces t by a + b * t when the least-squares affine map cuts the loss
    // by more than 1% and the result still fits the complexity cap.
    void affine_wrap(ExpressionTree& t, double& loss) {
        if (t.complexity() + 4 > static_cast<std::size_t>(cfg_.max_complexity)) return;
        buffer_.resize(data_.y.size());
        t.evaluate(data_.p2, data_.s3, buffer_);
        double mf = 0.0, my = 0.0;
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            mf += data_.w[i] * buffer_[i];
            my += data_.w[i] * data_.y[i];
        }
        double sff = 0.0, sfy = 0.0;
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            sff += data_.w[i] * (buffer_[i] - mf) * (buffer_[i] - mf);
            sfy += data_.w[i] * (buffer_[i] - mf) * (data_.y[i] - my);
        }
        if (!(sff > 1e-300) || !std::isfinite(sff) || !std::isfinite(sfy)) return;
        const double b = sfy / sff;
        const double a = my - b * mf;
        ExpressionTree wrapped = ExpressionTree::binary(
            Op::Add, ExpressionTree::constant(a), ExpressionTree::binary(Op::Mul, ExpressionTree::constant(b), t));
        const double l = loss_of(wrapped);
        if (l < 0.99 * loss) {
            t = std::move(wrapped);
            loss = l;
        }
    }

    // Levenberg-Marquardt on all constants jointly, forward-difference Jacobian.
    void fit_constants(ExpressionTree& t, int steps) {
        if (steps <= 0) return;
        std::vector<std::size_t> where;
        for (std::size_t i = 0; i < t.nodes().size(); ++i) {
            if (t.nodes()[i].op == Op::Const) where.push_back(i);
        }
        if (where.empty() || where.size() > 8) return;
        const auto n = static_cast<Eigen::Index>(data_.y.size());
        const auto m = static_cast<Eigen::Index>(where.size());
        auto& nodes = t.mutable_nodes();
        Eigen::VectorXd r(n), r_try(n), base(n);
        Eigen::MatrixXd jac(n, m);
        auto residual = [&](Eigen::VectorXd& out) {
            buffer_.resize(data_.y.size());
            t.evaluate(data_.p2, data_.s3, buffer_);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(i);
                out(i) = std::sqrt(data_.w[k]) * (buffer_[k] - data_.y[k]);
            }
            return out.squaredNorm();
        };
        double f = residual(r);
        double lambda = 1e-3;
        for (int s = 0; s < steps && std::isfinite(f) && f > 0.0; ++s) {
            for (Eigen::Index j = 0; j < m; ++j) {
                double& c = nodes[where[static_cast<std::size_t>(j)]].value;
                const double c0 = c;
                const double h = 1e-7 * std::max(1.0, std::abs(c0));
                c = c0 + h;
                residual(base);
                c = c0;
                jac.col(j) = (base - r) / h;
            }
            const Eigen::MatrixXd jtj = jac.transpose() * jac;
            const Eigen::VectorXd g = jac.transpose() * r;
            bool improved = false;
            for (int attempt = 0; attempt < 4 && !improved; ++attempt) {
                Eigen::MatrixXd a = jtj;
                a.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
                const Eigen::VectorXd delta = a.ldlt().solve(-g);
                if (!delta.allFinite()) break;
                std::vector<double> saved(where.size());
                for (std::size_t j = 0; j < where.size(); ++j) {
                    saved[j] = nodes[where[j]].value;
                    nodes[where[j]].value += delta(static_cast<Eigen::Index>(j));
                }
                const double f_try = residual(r_try);
                if (std::isfinite(f_try) && f_try < f) {
                    f = f_try;
                    r = r_try;
                    lambda = std::max(lambda * 0.1, 1e-12);
                    improved = true;
                } else {
                    for (std::size_t j = 0; j < where.size(); ++j) nodes[where[j]].value = saved[j];
                    lambda *= 10.0;
                }
            }
            if (!improved) break;
        }
    }

    // Coordinate-wise golden-section search on each constant. The bracket
    // half-width shrinks with the individual's refine level and grows back
    // when the optimum lands on an edge.
    void optimize_constants(Individual& ind) {
        if (cfg_.constant_steps == 0) return;
        auto& nodes = ind.tree.mutable_nodes();
        bool any = false;
        bool edge = false;
        for (auto& n : nodes) {
            if (n.op != Op::Const) continue;
            any = true;
            const double c0 = n.value;
            const double radius = std::max(std::abs(c0), 0.1) * std::ldexp(1.0, -ind.refine_level);
            double lo = c0 - radius, hi = c0 + radius;
            constexpr double g = 0.6180339887498949;
            double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
            n.value = x1;
            double f1 = loss_of(ind.tree);
            n.value = x2;
            double f2 = loss_of(ind.tree);
            for (int s = 0; s < cfg_.constant_steps; ++s) {
                if (f1 < f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - g * (hi - lo);
                    n.value = x1;
                    f1 = loss_of(ind.tree);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g * (hi - lo);
                    n.value = x2;
                    f2 = loss_of(ind.tree);
                }
            }
            const double xb = f1 < f2 ? x1 : x2;
            const double fb = std::min(f1, f2);
            if (fb < ind.loss) {
                n.value = xb;
                ind.loss = fb;
                if (std::abs(xb - c0) > 0.9 * radius) edge = true;
            } else {
                n.value = c0;
            }
        }
        if (!any) return;
        ind.refine_level = edge ? std::max(ind.refine_level - 1, 0) : std::min(ind.refine_level + 1, 48);
        ind.loss = loss_of(ind.tree);
        record(ind.tree, ind.loss);
    }

    const Columns& data_;
    const SymregConfig& cfg_;
    Stream rng_;
    std::vector<std::optional<ParetoEntry>> archive_;
    std::vector<double> buffer_;
};

}  // namespace

ParetoFront evolve(const Dataset& train, const SymregConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ValidationError("evolve: empty dataset");
    const Columns data = make_columns(train, cfg);
    Engine engine(data, cfg);
    return engine.run();
}

EnsembleReport ensemble_run(const Dataset& ds, std::span<const std::uint64_t> seeds, const SymregConfig& cfg) {
    if (seeds.size() < 2) throw ValidationError("ensemble_run needs at least two seeds");
    EnsembleReport report;
    report.members.resize(seeds.size());
    // each seed is independent; results land in fixed slots
    parallel_chunks(seeds.size(), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t s = b; s < e; ++s) {
            auto [train, test] = split(ds, 0.8, seeds[s]);
            SymregConfig local = cfg;
            local.seed = seeds[s];
            const ParetoFront front = evolve(train, local);

            std::vector<double> ty, tw;
            for (const auto& r : train.rows) {
                ty.push_back(r.y);
                tw.push_back(r.weight);
            }
            const double var = weighted_variance(ty, tw);
            const ParetoFront scaled = normalized_front(front, var);
            const ParetoEntry& chosen = select_pareto(scaled, static_cast<std::size_t>(cfg.max_complexity));
            const std::size_t at = static_cast<std::size_t>(&chosen - scaled.entries.data());

            EnsembleMember m;
            m.seed = seeds[s];
            m.tree = front.entries[at].tree;
            m.complexity = front.entries[at].complexity;
            m.train_loss = front.entries[at].loss;
            std::vector<double> pred, truth, w;
            for (const auto& r : test.rows) {
                pred.push_back(m.tree.evaluate(r.p2, r.sigma3));
                truth.push_back(r.y);
                w.push_back(r.weight);
            }
            m.r2 = r_squared(pred, truth, w).value_or(std::numeric_limits<double>::quiet_NaN());
            m.rmse = weighted_rmse(pred, truth, w);
            m.motifs = detect_motifs(m.tree);
            report.members[s] = std::move(m);
        }
    });

    std::vector<double> r2;
    for (const auto& m : report.members) {
        for (std::size_t i = 0; i < kMotifCount; ++i) report.frequency[i] += m.motifs.present[i] ? 1 : 0;
        if (!std::isnan(m.r2)) r2.push_back(m.r2);
    }
    if (!r2.empty()) {
        std::sort(r2.begin(), r2.end());
        report.worst_r2 = r2.front();
        report.best_r2 = r2.back();
        const std::size_t mid = r2.size() / 2;
        report.median_r2 = r2.size() % 2 ? r2[mid] : 0.5 * (r2[mid - 1] + r2[mid]);
    }
    return report;
}

}  // namespace cyd
