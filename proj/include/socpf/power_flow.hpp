#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "socpf/feeder.hpp"
#include "socpf/kernels.hpp"

namespace socpf {

struct OPFSolution;

/// Exact flow of `phase` on line `line_index`, direction 0 = from -> to.
std::complex<double> branch_flow(const Feeder& f, const VoltageState& v, int line_index, int direction, Phase phase);

struct PowerFlowOptions {
    double tol = 1e-8;
    int max_iter = 200;
    std::optional<VoltageState> initial;
    /// Multiplier per entry of Feeder::loads; empty means 1.
    std::vector<double> load_scale;
};

struct PowerFlowResult {
    VoltageState v;
    int iterations = 0;
    double max_mismatch = 0.0;
};

/// Per-node injection (PV output plus nothing at the substation) for given PV setpoints.
std::vector<std::complex<double>> pv_node_injection(const Feeder& f, const std::vector<std::complex<double>>& pv);
std::vector<std::complex<double>> scaled_demand(const Feeder& f, const std::vector<double>& load_scale);

/// Newton-Raphson power flow in polar coordinates. Throws ConvergenceError
/// with the worst mismatch when the tolerance is not reached.
PowerFlowResult solve_power_flow(const Feeder& f, const std::vector<std::complex<double>>& pv_injections,
                                 const PowerFlowOptions& opts = {});

/// PV setpoints with every unit at (p_max, 0).
std::vector<std::complex<double>> default_pv_injections(const Feeder& f);

struct VerificationReport {
    double max_flow_mismatch = 0.0;
    double max_balance_residual = 0.0;
    int worst_node = -1;
    bool pass = false;

    std::string to_json() const;
};

/// Recomputes exact flows from the solution's recovered voltages and compares
/// them with the model's flows and nodal balances.
VerificationReport verify_opf_solution(const Feeder& f, const OPFSolution& sol, double tol);

}  // namespace socpf
