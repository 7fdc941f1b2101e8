#pragma once

#include <array>
#include <complex>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "socpf/conic_model.hpp"
#include "socpf/feeder.hpp"
#include "socpf/kernels.hpp"

namespace socpf {

/// Ordered node pair (i phi, j phi') appearing in some flow expression.
struct AuxPath {
    int from = 0;
    int to = 0;
    bool operator==(const AuxPath&) const = default;
};

/// All auxiliary paths of the feeder: same-bus cross-phase pairs at each line
/// end and every cross-bus phase pair, in both orientations, deduplicated.
std::vector<AuxPath> enumerate_aux_paths(const Feeder& f);

/// Setting variables' expansion point for one controlled PV unit.
struct VvcBase {
    std::array<double, 4> v{};
    double q_max = 0.0;
    bool operator==(const VvcBase&) const = default;
};

struct BasePoint {
    std::vector<double> u0;
    std::vector<double> theta0;
    /// One entry per PV unit with VVC, in feeder order (optimal mode only).
    std::vector<VvcBase> vvc;
    bool operator==(const BasePoint&) const = default;
};

BasePoint base_point_from(const VoltageState& v);

/// Variable ids of an OPF model.
struct OpfLayout {
    std::vector<AuxPath> paths;
    std::vector<int> reverse;
    std::map<std::pair<int, int>, int> path_lookup;
    std::vector<VarId> u, theta, c, e;
    /// [line][direction][phase position]
    std::vector<std::array<std::vector<VarId>, 2>> p_flow, q_flow;
    /// Per node; -1 where the node is not at the substation.
    std::vector<VarId> p_sub, q_sub;
    std::vector<VarId> pv_p, pv_q;
    std::vector<std::string> node_names;

    int path_id(int from, int to) const;
    /// True for the orientation that carries the Taylor rows and the cone.
    bool canonical(int path) const { return path <= reverse[static_cast<size_t>(path)]; }
};

struct ModelOptions {
    bool relax_upper_voltage = false;
    /// When false every PV is fixed at (p_max, 0); when true VVC units are dispatchable.
    bool vvc_dispatch = false;
};

struct OpfModel {
    ConicModel model;
    OpfLayout layout;
};

/// Flow definitions, symmetry couplings, balances, voltage bounds, substation
/// fixings, PV outputs and the cost objective. No Taylor rows and no cones.
OpfModel build_base_model(const Feeder& f, const ModelOptions& opts = {});

/// Real and reactive flow expressions in u, c, e for one line phase.
std::pair<LinearExpr, LinearExpr> flow_expressions(const Feeder& f, const OpfLayout& layout, int line, int direction,
                                                   int k);

/// Coefficients of the first-order expansion of c and e around a base point:
/// c = c_const + c_ui*u_i + c_uj*u_j + c_dth*(th_i - th_j), same for e.
struct TaylorCoefficients {
    double c_const = 0, c_ui = 0, c_uj = 0, c_dth = 0;
    double e_const = 0, e_ui = 0, e_uj = 0, e_dth = 0;
};

TaylorCoefficients taylor_coefficients(double u0_i, double u0_j, double dtheta0);

/// The two linear equalities bounding c and e of a path, as rows "expr = rhs".
std::array<LinearRow, 2> taylor_bounds(const OpfLayout& layout, int path, const BasePoint& bp);
/// Adds Taylor rows for every canonical path.
void add_taylor_bounds(OpfModel& m, const BasePoint& bp);

/// Adds c^2 + e^2 <= u_i u_j for the path (and its reverse); false if already present.
bool add_soc_cone(OpfModel& m, int path);
std::string cone_name(const OpfLayout& layout, int path);

struct OPFSolution {
    std::vector<double> x;
    std::vector<AuxPath> paths;
    std::vector<double> u, theta, c, e;
    VoltageState v;
    std::vector<LineFlow> flows;
    std::vector<std::complex<double>> substation;
    std::vector<std::complex<double>> pv;
    std::vector<PathErrorValues> errors;
    /// Solved curve settings per VVC unit (optimal mode only).
    std::vector<VvcBase> vvc_settings;
    double objective = 0.0;
};

/// Pulls model values into an OPFSolution and scores every path.
OPFSolution extract_solution(const Feeder& f, const OpfModel& m, std::span<const double> x, double objective);

double soc_error(const OPFSolution& sol, int path);
std::pair<double, double> linearization_error(const OPFSolution& sol, int path);
/// mag = sqrt(u) with values down to -1e-9 clamped to zero; ang = theta.
VoltageState recover_voltages(const Feeder& f, std::span<const double> u, std::span<const double> theta);

struct ErrorSummary {
    double max_soc = 0.0;
    double max_delta_c = 0.0;
    double max_delta_e = 0.0;
};
ErrorSummary summarize_errors(const std::vector<PathErrorValues>& errors);

/// CSV with header from,to,soc_error,delta_c,delta_e.
std::string path_errors_csv(const Feeder& f, const OPFSolution& sol);

}  // namespace socpf
