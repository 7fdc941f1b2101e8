#pragma once

#include "socpf/conic_model.hpp"
#include "socpf/ipm.hpp"

namespace socpf {

struct BnbOptions {
    /// Absolute optimality gap on the objective.
    double gap = 1e-6;
    int node_limit = 20000;
    double int_tol = 1e-6;
    SolverSettings solver;
};

/// Best-bound branch-and-bound over the model's binaries using SOCP
/// relaxations. Exclusive-zero groups are branched five-way ("which member is
/// zero"); remaining binaries use most-fractional dichotomy. Sibling
/// relaxations run in parallel; results are processed in a fixed order, so the
/// search is deterministic. Integral leaves are re-solved with binaries fixed.
SolverResult solve_misocp(const ConicModel& model, const BnbOptions& opts = {});

}  // namespace socpf
