#include "socpf/bnb.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <queue>

#include <spdlog/spdlog.h>

namespace socpf {

namespace {

struct Fixing {
    VarId var;
    double value;
};

struct Node {
    std::vector<Fixing> fixings;
    SolverResult relax;
    long id = 0;
};

struct NodeOrder {
    bool operator()(const Node* a, const Node* b) const {
        if (a->relax.objective != b->relax.objective) return a->relax.objective > b->relax.objective;
        return a->id > b->id;
    }
};

SolverResult solve_with(const ConicModel& base, const std::vector<Fixing>& fix, const SolverSettings& st) {
    ConicModel m = base;
    for (const auto& f : fix) m.set_bounds(f.var, f.value, f.value);
    return solve_socp(m, st);
}

double frac(double v) { return std::min(std::abs(v), std::abs(1.0 - v)); }

// Child fixings for a node, or empty when the relaxation is integral.
std::vector<std::vector<Fixing>> branch(const ConicModel& model, const Node& node, double tol) {
    const auto& x = node.relax.x;
    const auto& groups = model.exclusive_zero_groups();
    int best_group = -1;
    double best_score = 0.0;
    for (size_t g = 0; g < groups.size(); ++g) {
        double score = 0.0;
        int zeros = 0;
        bool integral = true;
        for (VarId v : groups[g]) {
            const double val = x[static_cast<size_t>(v)];
            score += frac(val);
            if (frac(val) > tol) integral = false;
            if (std::abs(val) <= tol) ++zeros;
        }
        if (integral && zeros == 1) continue;
        if (integral) score = std::max(score, tol * 2);
        if (best_group < 0 || score > best_score) {
            best_group = static_cast<int>(g);
            best_score = score;
        }
    }
    std::vector<std::vector<Fixing>> children;
    if (best_group >= 0) {
        const auto& g = groups[static_cast<size_t>(best_group)];
        for (size_t k = 0; k < g.size(); ++k) {
            auto fix = node.fixings;
            for (size_t j = 0; j < g.size(); ++j) fix.push_back({g[j], j == k ? 0.0 : 1.0});
            children.push_back(std::move(fix));
        }
        return children;
    }
    std::vector<char> grouped(static_cast<size_t>(model.num_variables()), 0);
    for (const auto& g : groups)
        for (VarId v : g) grouped[static_cast<size_t>(v)] = 1;
    VarId pick = -1;
    double worst = tol;
    for (VarId v = 0; v < model.num_variables(); ++v) {
        if (model.variable(v).kind != VarKind::Binary || grouped[static_cast<size_t>(v)]) continue;
        const double fr = frac(x[static_cast<size_t>(v)]);
        if (fr > worst) {
            worst = fr;
            pick = v;
        }
    }
    if (pick >= 0) {
        for (double val : {0.0, 1.0}) {
            auto fix = node.fixings;
            fix.push_back({pick, val});
            children.push_back(std::move(fix));
        }
    }
    return children;
}

}  // namespace

SolverResult solve_misocp(const ConicModel& model, const BnbOptions& opts) {
    std::vector<std::unique_ptr<Node>> pool;
    std::priority_queue<Node*, std::vector<Node*>, NodeOrder> open;
    long next_id = 0;
    int solved = 0, branched = 0;

    auto root = std::make_unique<Node>();
    root->relax = solve_socp(model, opts.solver);
    ++solved;
    if (!root->relax.optimal()) {
        root->relax.nodes_solved = solved;
        return root->relax;
    }
    open.push(root.get());
    pool.push_back(std::move(root));

    SolverResult incumbent;
    incumbent.status = SolveStatus::Infeasible;
    double best = std::numeric_limits<double>::infinity();
    bool limit_hit = false;
    double bound = -std::numeric_limits<double>::infinity();

    while (!open.empty()) {
        Node* node = open.top();
        open.pop();
        bound = node->relax.objective;
        if (bound >= best - opts.gap) {
            bound = best;
            break;
        }
        auto children = branch(model, *node, opts.int_tol);
        if (children.empty()) {
            // integral leaf: fix the binaries at their rounded values and re-solve
            std::vector<Fixing> fix;
            for (VarId v = 0; v < model.num_variables(); ++v)
                if (model.variable(v).kind == VarKind::Binary)
                    fix.push_back({v, std::round(node->relax.x[static_cast<size_t>(v)])});
            SolverResult polished = solve_with(model, fix, opts.solver);
            ++solved;
            if (polished.optimal() && polished.objective < best) {
                best = polished.objective;
                incumbent = std::move(polished);
            }
            continue;
        }
        if (solved + static_cast<int>(children.size()) > opts.node_limit) {
            limit_hit = true;
            open.push(node);
            break;
        }
        ++branched;
        std::vector<SolverResult> results(children.size());
        const auto nc = static_cast<long>(children.size());
#pragma omp parallel for schedule(dynamic)
        for (long c = 0; c < nc; ++c)
            results[static_cast<size_t>(c)] = solve_with(model, children[static_cast<size_t>(c)], opts.solver);
        solved += static_cast<int>(children.size());
        for (size_t c = 0; c < children.size(); ++c) {
            if (!results[c].optimal()) {
                if (results[c].status != SolveStatus::Infeasible)
                    spdlog::warn("branch-and-bound child ended with status {}", to_string(results[c].status));
                continue;
            }
            if (results[c].objective >= best - opts.gap) continue;
            auto child = std::make_unique<Node>();
            child->fixings = std::move(children[c]);
            child->relax = std::move(results[c]);
            child->id = ++next_id;
            open.push(child.get());
            pool.push_back(std::move(child));
        }
    }
    if (open.empty() && std::isfinite(best)) bound = best;
    if (limit_hit && !open.empty()) bound = open.top()->relax.objective;

    if (!std::isfinite(best)) {
        incumbent.status = limit_hit ? SolveStatus::IterationLimit : SolveStatus::Infeasible;
    } else if (limit_hit) {
        incumbent.status = SolveStatus::IterationLimit;
    }
    incumbent.nodes_solved = solved;
    incumbent.nodes_branched = branched;
    incumbent.best_bound = bound;
    spdlog::debug("branch-and-bound: {} relaxations, {} branchings, objective {:.9g}", solved, branched, best);
    return incumbent;
}

}  // namespace socpf
