#pragma once

#include <string>
#include <vector>

#include "socpf/conic_model.hpp"

namespace socpf {

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };

std::string to_string(SolveStatus s);

struct SolverSettings {
    double feastol = 1e-9;
    double abstol = 1e-9;
    double reltol = 1e-9;
    int max_iter = 200;
    /// Static KKT regularization; iterative refinement removes its effect.
    double static_reg = 1e-9;
    int max_refine = 10;
    int equil_iters = 3;
    bool verbose = false;
};

struct SolverResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    std::vector<double> x;
    double objective = 0.0;
    /// Residuals of the returned point in the original (unscaled) data.
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
    /// Names of rows carrying weight in an infeasibility certificate.
    std::vector<std::string> certificate;

    // Branch-and-bound diagnostics (zero for continuous solves).
    int nodes_solved = 0;
    int nodes_branched = 0;
    double best_bound = 0.0;

    bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Solves the continuous relaxation of `model`: binaries are treated as
/// continuous variables inside their current bounds.
SolverResult solve_socp(const ConicModel& model, const SolverSettings& settings = {});

/// Names of the rows and bounds in a least-weight (l1) Farkas certificate of
/// the continuous relaxation; empty when the relaxation is feasible.
std::vector<std::string> infeasibility_certificate(const ConicModel& model, const SolverSettings& settings = {});

}  // namespace socpf
