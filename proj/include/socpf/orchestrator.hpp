#pragma once

#include <optional>
#include <string>
#include <vector>

#include "socpf/bnb.hpp"
#include "socpf/feeder.hpp"
#include "socpf/opf_model.hpp"
#include "socpf/power_flow.hpp"
#include "socpf/vvc.hpp"

namespace socpf {

enum class Mode { NoVvc, VvcDefault, VvcOptimal };
enum class InitialPoint { FlatStart, WarmStart };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct SolveOptions {
    Mode mode = Mode::NoVvc;
    double eps_stage1 = 1e-6;
    double eps_cone = 1e-8;
    double eps_lin = 1e-6;
    int max_outer = 10;
    int max_stage1 = 30;
    InitialPoint initial = InitialPoint::FlatStart;
    bool relax_upper_voltage = false;
    /// Initial half-width (p.u.^2) of the box around the base-point settings in
    /// optimal mode; halved whenever setting changes stop contracting.
    double trust_radius = 0.02;
    /// Curve settings per VVC unit for default mode; empty means the standard defaults.
    std::vector<VVCSettings> vvc_settings;
    BnbOptions bnb;

    void validate() const;
};

struct Stage1Entry {
    int outer = 0;
    int iteration = 0;
    double max_dmag = 0.0;
    double max_dang = 0.0;
    double max_dsetting = 0.0;
    double objective = 0.0;
    int bnb_nodes = 0;
};

struct Stage2Entry {
    int outer = 0;
    double max_soc_error = 0.0;
    int cones_added = 0;
};

struct VvcUnitReport {
    int pv = -1;
    std::string name;
    double p = 0.0;
    double q = 0.0;
    double u = 0.0;
    VVCSettings settings;
    ZoneCheck zone;
    double f_error = 0.0;
};

enum class SolveStatusCode { Converged, Stage1NonConvergence, OuterNonConvergence, Infeasible, SolverFailure };
std::string to_string(SolveStatusCode s);

struct SolveReport {
    Mode mode = Mode::NoVvc;
    SolveStatusCode status = SolveStatusCode::SolverFailure;
    std::string message;
    std::vector<std::string> certificate;
    std::vector<Stage1Entry> stage1;
    std::vector<Stage2Entry> stage2;
    int cones = 0;
    ErrorSummary errors;
    double max_f_error = 0.0;
    double objective = 0.0;
    std::vector<VvcUnitReport> units;
    double p_available_kw = 0.0;
    double p_dispatched_kw = 0.0;
    /// Percent; zero when no VVC capacity is present.
    double curtailment = 0.0;
    bool zones_consistent = true;
    VerificationReport verification;

    bool converged() const { return status == SolveStatusCode::Converged; }
    std::string to_json() const;
    /// CSV: stage,outer,iteration,max_dmag,max_dang,max_dsetting,objective,bnb_nodes,max_soc_error,cones_added
    std::string trace_csv() const;
};

struct SolveResult {
    OPFSolution solution;
    SolveReport report;
};

bool stage1_converged(const VoltageState& prev, const VoltageState& cur, double eps);

/// Next expansion point: solved u and theta, and solved curve settings when present.
BasePoint update_base_points(const OPFSolution& sol, const BasePoint& prev);

/// Initial base point for the chosen policy (flat start or oracle power flow).
BasePoint initial_base_point(const Feeder& f, const SolveOptions& opts);

/// Model of one Stage-1 pass.
struct StageModel {
    OpfModel opf;
    std::vector<VvcVars> vvc;
};
/// `radius` bounds optimal-mode settings to the box around bp.vvc (q_max scaled by s_max / 0.08).
StageModel build_stage_model(const Feeder& f, const SolveOptions& opts, const BasePoint& bp,
                             const std::vector<int>& cones, double radius = kInf);

/// Two-stage sequential linearization with lazy cone addition.
SolveResult two_stage_solve(const Feeder& f, const SolveOptions& opts);

}  // namespace socpf
