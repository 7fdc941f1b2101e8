#include "socpf/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "socpf/common.hpp"
#include "socpf/metrics.hpp"

namespace socpf {

std::string to_string(Mode m) {
    switch (m) {
        case Mode::NoVvc: return "no-vvc";
        case Mode::VvcDefault: return "default";
        case Mode::VvcOptimal: return "optimal";
    }
    return "unknown";
}

Mode parse_mode(const std::string& s) {
    if (s == "no-vvc" || s == "no_vvc") return Mode::NoVvc;
    if (s == "default" || s == "vvc-default" || s == "vvc_default") return Mode::VvcDefault;
    if (s == "optimal" || s == "vvc-optimal" || s == "vvc_optimal") return Mode::VvcOptimal;
    throw InputError("unknown mode '" + s + "' (expected no-vvc, default or optimal)");
}

std::string to_string(SolveStatusCode s) {
    switch (s) {
        case SolveStatusCode::Converged: return "converged";
        case SolveStatusCode::Stage1NonConvergence: return "stage1_nonconvergence";
        case SolveStatusCode::OuterNonConvergence: return "outer_nonconvergence";
        case SolveStatusCode::Infeasible: return "infeasible";
        case SolveStatusCode::SolverFailure: return "solver_failure";
    }
    return "unknown";
}

void SolveOptions::validate() const {
    if (!(trust_radius > 0)) throw PreconditionError("trust radius must be positive");
    if (!(eps_stage1 > 0) || !(eps_cone > 0) || !(eps_lin > 0)) throw PreconditionError("tolerances must be positive");
    if (max_outer < 1 || max_stage1 < 1) throw PreconditionError("iteration caps must be at least 1");
    for (const auto& s : vvc_settings) s.validate();
}

bool stage1_converged(const VoltageState& prev, const VoltageState& cur, double eps) {
    if (prev.mag.size() != cur.mag.size() || prev.ang.size() != cur.ang.size() || prev.mag.size() != prev.ang.size())
        throw PreconditionError("voltage states cover different node sets");
    for (size_t i = 0; i < prev.mag.size(); ++i)
        if (!(std::abs(prev.mag[i] - cur.mag[i]) < eps) || !(std::abs(prev.ang[i] - cur.ang[i]) < eps)) return false;
    return true;
}

BasePoint update_base_points(const OPFSolution& sol, const BasePoint& prev) {
    BasePoint bp;
    bp.u0 = sol.u;
    bp.theta0 = sol.theta;
    bp.vvc = sol.vvc_settings.empty() ? prev.vvc : sol.vvc_settings;
    return bp;
}

namespace {

std::vector<int> vvc_units(const Feeder& f) {
    std::vector<int> out;
    for (size_t k = 0; k < f.pv_units.size(); ++k)
        if (f.pv_units[k].has_vvc) out.push_back(static_cast<int>(k));
    return out;
}

VVCSettings unit_settings(const Feeder& f, const SolveOptions& opts, size_t k, int pv) {
    if (!opts.vvc_settings.empty()) return opts.vvc_settings.at(k);
    return default_settings(f.pv_units[static_cast<size_t>(pv)].s_max);
}

VoltageState state_of(const Feeder& f, const BasePoint& bp) { return recover_voltages(f, bp.u0, bp.theta0); }

double max_setting_change(const std::vector<VvcBase>& a, const std::vector<VvcBase>& b) {
    double d = 0.0;
    for (size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
        for (size_t n = 0; n < 4; ++n) d = std::max(d, std::abs(a[k].v[n] - b[k].v[n]));
        d = std::max(d, std::abs(a[k].q_max - b[k].q_max));
    }
    return d;
}

std::pair<double, double> max_changes(const VoltageState& a, const VoltageState& b) {
    double dm = 0.0, da = 0.0;
    for (size_t i = 0; i < a.mag.size(); ++i) {
        dm = std::max(dm, std::abs(a.mag[i] - b.mag[i]));
        da = std::max(da, std::abs(a.ang[i] - b.ang[i]));
    }
    return {dm, da};
}

}  // namespace

BasePoint initial_base_point(const Feeder& f, const SolveOptions& opts) {
    BasePoint bp;
    if (opts.initial == InitialPoint::WarmStart) {
        try {
            bp = base_point_from(solve_power_flow(f, default_pv_injections(f)).v);
        } catch (const ConvergenceError& e) {
            spdlog::warn("warm start power flow failed ({}); using flat start", e.what());
            bp = base_point_from(flat_start(f));
        }
    } else {
        bp = base_point_from(flat_start(f));
    }
    if (opts.mode == Mode::VvcOptimal) {
        const auto units = vvc_units(f);
        for (size_t k = 0; k < units.size(); ++k) {
            const VVCSettings s = unit_settings(f, opts, k, units[k]);
            bp.vvc.push_back({{s.v1, s.v2, s.v3, s.v4}, s.q_max});
        }
    }
    return bp;
}

StageModel build_stage_model(const Feeder& f, const SolveOptions& opts, const BasePoint& bp,
                             const std::vector<int>& cones, double radius) {
    ModelOptions mo;
    mo.relax_upper_voltage = opts.relax_upper_voltage;
    mo.vvc_dispatch = opts.mode != Mode::NoVvc;
    StageModel sm{build_base_model(f, mo), {}};
    add_taylor_bounds(sm.opf, bp);
    for (int p : cones) add_soc_cone(sm.opf, p);
    if (opts.mode == Mode::NoVvc) return sm;
    const auto units = vvc_units(f);
    for (size_t k = 0; k < units.size(); ++k) {
        const int pv = units[k];
        const double s_max = f.pv_units[static_cast<size_t>(pv)].s_max;
        const VVCSettings s = unit_settings(f, opts, k, pv);
        if (opts.mode == Mode::VvcDefault) {
            sm.vvc.push_back(add_default_vvc(sm.opf, f, pv, s, default_big_m(s, s_max)));
        } else {
            const int node = f.node_index(f.pv_units[static_cast<size_t>(pv)].node);
            const VvcBase& b = bp.vvc.at(k);
            VvcVars vars = add_optimal_vvc(sm.opf, f, pv, b, bp.u0.at(static_cast<size_t>(node)), s, optimal_big_m(s, s_max));
            auto& model = sm.opf.model;
            auto clamp_box = [&](VarId v, double center, double half) {
                const auto& var = model.variable(v);
                const double lo = std::max(var.lb, center - half), hi = std::min(var.ub, center + half);
                if (hi - lo < 1e-7) {
                    const double mid = std::clamp(center, var.lb, var.ub);
                    model.set_bounds(v, mid, mid);
                } else {
                    model.set_bounds(v, lo, hi);
                }
            };
            for (size_t n = 0; n < 4; ++n) clamp_box(vars.v[n], b.v[n], radius);
            clamp_box(vars.q_max, b.q_max, radius * s_max / (2.0 * SettingRanges::min_gap));
            sm.vvc.push_back(vars);
        }
    }
    return sm;
}

namespace {

struct Iterate {
    OPFSolution sol;
    BasePoint bp;
    std::vector<VvcVars> vvc;
};

void fill_unit_reports(const Feeder& f, const SolveOptions& opts, const Iterate& it, SolveReport& rep) {
    rep.units.clear();
    rep.max_f_error = 0.0;
    rep.zones_consistent = true;
    const double kw = f.mva_base * 1000.0;
    double avail = 0.0, disp = 0.0;
    const double tol = std::max(opts.eps_lin, opts.bnb.int_tol);
    for (size_t k = 0; k < it.vvc.size(); ++k) {
        const auto& vars = it.vvc[k];
        const auto& unit = f.pv_units[static_cast<size_t>(vars.pv)];
        VvcUnitReport r;
        r.pv = vars.pv;
        r.name = unit.name;
        r.p = it.sol.pv[static_cast<size_t>(vars.pv)].real();
        r.q = it.sol.pv[static_cast<size_t>(vars.pv)].imag();
        r.u = it.sol.u[static_cast<size_t>(vars.node)];
        const VVCSettings limits = unit_settings(f, opts, k, vars.pv);
        r.settings = opts.mode == Mode::VvcOptimal ? solved_settings(vars, it.sol.x, unit.s_max, limits) : limits;
        std::array<double, 5> z{};
        for (size_t n = 0; n < 5; ++n) z[n] = it.sol.x[static_cast<size_t>(vars.z[n])];
        r.zone = check_zone(r.u, r.q, z, r.settings, tol);
        if (opts.mode == Mode::VvcOptimal && (r.zone.active_zone == 2 || r.zone.active_zone == 4)) {
            const int which = r.zone.active_zone;
            const VvcBase& b = it.bp.vvc.at(k);
            const double u0 = it.bp.u0.at(static_cast<size_t>(vars.node));
            const FLinear lin = linearize_f(b, u0, which);
            const double va = which == 2 ? r.settings.v1 : r.settings.v3;
            const double vb = which == 2 ? r.settings.v2 : r.settings.v4;
            r.f_error = std::abs(lin.evaluate(r.settings.q_max, r.u, va, vb) -
                                 f_exact(which, r.settings.q_max, r.u, va, vb));
            rep.max_f_error = std::max(rep.max_f_error, r.f_error);
        }
        rep.zones_consistent = rep.zones_consistent && r.zone.ok;
        avail += unit.p_max;
        disp += std::clamp(r.p, 0.0, unit.p_max);
        rep.units.push_back(r);
    }
    rep.p_available_kw = avail * kw;
    rep.p_dispatched_kw = disp * kw;
    rep.curtailment = avail > 0 ? curtailment_percent(avail, disp) : 0.0;
}

void finish_report(const Feeder& f, const SolveOptions& opts, const Iterate& it, int cones, SolveReport& rep) {
    rep.objective = it.sol.objective;
    rep.cones = cones;
    rep.errors = summarize_errors(it.sol.errors);
    fill_unit_reports(f, opts, it, rep);
    rep.verification = verify_opf_solution(f, it.sol, 10.0 * opts.eps_lin);
}

}  // namespace

SolveResult two_stage_solve(const Feeder& f, const SolveOptions& opts) {
    opts.validate();
    const auto units = vvc_units(f);
    if (opts.mode != Mode::NoVvc && units.empty())
        throw PreconditionError("VVC modes need at least one PV unit with VVC");
    if (!opts.vvc_settings.empty() && opts.vvc_settings.size() != units.size())
        throw PreconditionError("one VVC settings entry per VVC unit expected");

    SolveResult out;
    SolveReport& rep = out.report;
    rep.mode = opts.mode;

    BasePoint bp = initial_base_point(f, opts);
    std::vector<int> cones;
    std::optional<Iterate> last;
    std::vector<int> reverse;
    {
        const auto paths = enumerate_aux_paths(f);
        std::map<std::pair<int, int>, int> lookup;
        for (size_t p = 0; p < paths.size(); ++p) lookup[{paths[p].from, paths[p].to}] = static_cast<int>(p);
        for (const auto& p : paths) reverse.push_back(lookup.at({p.to, p.from}));
    }

    double radius = opts.trust_radius;
    double prev_ds = kInf;
    for (int outer = 1; outer <= opts.max_outer; ++outer) {
        bool stage1_ok = false;
        for (int it = 1; it <= opts.max_stage1; ++it) {
            StageModel sm = build_stage_model(f, opts, bp, cones, radius);
            const SolverResult res = sm.opf.model.num_binaries() > 0 ? solve_misocp(sm.opf.model, opts.bnb)
                                                                     : solve_socp(sm.opf.model, opts.bnb.solver);
            if (!res.optimal()) {
                rep.status = res.status == SolveStatus::Infeasible ? SolveStatusCode::Infeasible
                                                                   : SolveStatusCode::SolverFailure;
                rep.certificate = res.certificate;
                if (res.status == SolveStatus::Infeasible) {
                    auto sparse = infeasibility_certificate(sm.opf.model, opts.bnb.solver);
                    if (!sparse.empty()) rep.certificate = std::move(sparse);
                }
                rep.message = "solver returned " + to_string(res.status) + " in outer " + std::to_string(outer) +
                              ", iteration " + std::to_string(it);
                spdlog::error("{}", rep.message);
                if (last) {
                    out.solution = last->sol;
                    finish_report(f, opts, *last, static_cast<int>(cones.size()), rep);
                }
                return out;
            }
            Iterate cur{extract_solution(f, sm.opf, res.x, res.objective), bp, std::move(sm.vvc)};
            if (opts.mode == Mode::VvcOptimal) {
                for (size_t k = 0; k < cur.vvc.size(); ++k) {
                    const auto& unit = f.pv_units[static_cast<size_t>(cur.vvc[k].pv)];
                    const VVCSettings s =
                        solved_settings(cur.vvc[k], res.x, unit.s_max, unit_settings(f, opts, k, cur.vvc[k].pv));
                    cur.sol.vvc_settings.push_back({{s.v1, s.v2, s.v3, s.v4}, s.q_max});
                }
            }
            const auto [dm, da] = max_changes(state_of(f, bp), cur.sol.v);
            const double ds = max_setting_change(bp.vvc, cur.sol.vvc_settings);
            if (opts.mode == Mode::VvcOptimal) {
                if (ds > 0.5 * prev_ds) radius = 0.5 * std::min(radius, ds);
                prev_ds = ds;
            }
            rep.stage1.push_back({outer, it, dm, da, ds, res.objective, res.nodes_solved});
            spdlog::debug("outer {} stage-1 {}: dmag {:.3e} dang {:.3e} dset {:.3e} obj {:.9g}", outer, it, dm, da, ds,
                          res.objective);
            const bool done = stage1_converged(state_of(f, bp), cur.sol.v, opts.eps_stage1);
            bp = update_base_points(cur.sol, bp);
            last = std::move(cur);
            if (done) {
                stage1_ok = true;
                break;
            }
        }
        if (!stage1_ok) {
            rep.status = SolveStatusCode::Stage1NonConvergence;
            rep.message = "base points did not converge within " + std::to_string(opts.max_stage1) + " iterations";
            spdlog::warn("{}", rep.message);
            out.solution = last->sol;
            finish_report(f, opts, *last, static_cast<int>(cones.size()), rep);
            return out;
        }

        const auto& sol = last->sol;
        double worst = 0.0;
        int added = 0;
        for (int p = 0; p < static_cast<int>(sol.paths.size()); ++p) {
            if (p > reverse[static_cast<size_t>(p)]) continue;
            const double err = std::abs(sol.errors[static_cast<size_t>(p)].soc_error);
            worst = std::max(worst, err);
            if (err > opts.eps_cone && std::find(cones.begin(), cones.end(), p) == cones.end()) {
                cones.push_back(p);
                ++added;
            }
        }
        std::sort(cones.begin(), cones.end());
        rep.cones = static_cast<int>(cones.size());
        rep.stage2.push_back({outer, worst, added});

        finish_report(f, opts, *last, static_cast<int>(cones.size()), rep);
        const bool lin_ok = std::max(rep.errors.max_delta_c, rep.errors.max_delta_e) <= opts.eps_lin &&
                            rep.max_f_error <= opts.eps_lin;
        if (added == 0 && worst <= opts.eps_cone && lin_ok) {
            rep.status = SolveStatusCode::Converged;
            rep.message = "converged";
            out.solution = last->sol;
            return out;
        }
    }
    rep.status = SolveStatusCode::OuterNonConvergence;
    rep.message = "outer loop did not meet the error tolerances within " + std::to_string(opts.max_outer) + " passes";
    spdlog::warn("{}", rep.message);
    out.solution = last->sol;
    finish_report(f, opts, *last, static_cast<int>(cones.size()), rep);
    return out;
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string SolveReport::to_json() const {
    using J = nlohmann::ordered_json;
    J j;
    j["mode"] = to_string(mode);
    j["status"] = to_string(status);
    j["message"] = message;
    j["objective"] = objective;
    j["stage1_iterations"] = stage1.size();
    j["outer_iterations"] = stage2.size();
    j["cones"] = cones;
    j["max_soc_error"] = errors.max_soc;
    j["max_delta_c"] = errors.max_delta_c;
    j["max_delta_e"] = errors.max_delta_e;
    j["max_f_error"] = max_f_error;
    j["zones_consistent"] = zones_consistent;
    j["p_available_kw"] = p_available_kw;
    j["p_dispatched_kw"] = p_dispatched_kw;
    j["curtailment_percent"] = curtailment;
    j["verification"] = J::parse(verification.to_json());
    J u = J::array();
    for (const auto& r : units) {
        J e;
        e["name"] = r.name;
        e["p"] = r.p;
        e["q"] = r.q;
        e["u"] = r.u;
        e["zone"] = r.zone.active_zone;
        e["zone_ok"] = r.zone.ok;
        e["q_error"] = r.zone.q_error;
        e["f_error"] = r.f_error;
        e["settings"] = {{"v1", r.settings.v1}, {"v2", r.settings.v2}, {"v3", r.settings.v3},
                         {"v4", r.settings.v4}, {"q_max", r.settings.q_max}};
        u.push_back(e);
    }
    j["units"] = u;
    j["certificate"] = certificate;
    J t1 = J::array();
    for (const auto& s : stage1)
        t1.push_back({{"outer", s.outer}, {"iteration", s.iteration}, {"max_dmag", s.max_dmag},
                      {"max_dang", s.max_dang}, {"max_dsetting", s.max_dsetting}, {"objective", s.objective},
                      {"bnb_nodes", s.bnb_nodes}});
    J t2 = J::array();
    for (const auto& s : stage2)
        t2.push_back({{"outer", s.outer}, {"max_soc_error", s.max_soc_error}, {"cones_added", s.cones_added}});
    j["trace"] = {{"stage1", t1}, {"stage2", t2}};
    return j.dump(2);
}

std::string SolveReport::trace_csv() const {
    std::ostringstream out;
    out << "stage,outer,iteration,max_dmag,max_dang,max_dsetting,objective,bnb_nodes,max_soc_error,cones_added\n";
    size_t k = 0;
    for (const auto& s2 : stage2) {
        for (; k < stage1.size() && stage1[k].outer == s2.outer; ++k) {
            const auto& s = stage1[k];
            out << "1," << s.outer << ',' << s.iteration << ',' << num(s.max_dmag) << ',' << num(s.max_dang) << ','
                << num(s.max_dsetting) << ',' << num(s.objective) << ',' << s.bnb_nodes << ",,\n";
        }
        out << "2," << s2.outer << ",,,,,,," << num(s2.max_soc_error) << ',' << s2.cones_added << '\n';
    }
    for (; k < stage1.size(); ++k) {
        const auto& s = stage1[k];
        out << "1," << s.outer << ',' << s.iteration << ',' << num(s.max_dmag) << ',' << num(s.max_dang) << ','
            << num(s.max_dsetting) << ',' << num(s.objective) << ',' << s.bnb_nodes << ",,\n";
    }
    return out.str();
}

}  // namespace socpf
