// Acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "socpf/bnb.hpp"
#include "socpf/metrics.hpp"
#include "socpf/orchestrator.hpp"
#include "socpf/power_flow.hpp"
#include "socpf/qsts.hpp"
#include "socpf/vvc.hpp"
#include "test_util.hpp"

using namespace socpf;

namespace {

const std::vector<std::string> kFeeders{"two_bus", "two_bus_vvc", "four_bus", "feeder30"};

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::map<std::string, Feeder> g_feeders;
// Every converged solve, for the oracle-agreement check.
std::vector<std::pair<std::string, SolveResult>> g_solves;

const Feeder& feeder(const std::string& name) {
    auto it = g_feeders.find(name);
    if (it == g_feeders.end()) it = g_feeders.emplace(name, test::bundled(name)).first;
    return it->second;
}

SolveResult solve(const std::string& name, Mode mode, bool relax = false) {
    SolveOptions o;
    o.mode = mode;
    o.relax_upper_voltage = relax;
    auto r = two_stage_solve(feeder(name), o);
    if (r.report.converged())
        g_solves.emplace_back(name + "/" + to_string(mode) + (relax ? "/relaxed" : ""), r);
    return r;
}

std::map<std::string, SolveResult> g_cache;

const SolveResult& cached(const std::string& name, Mode mode) {
    const std::string key = name + "/" + to_string(mode);
    auto it = g_cache.find(key);
    if (it == g_cache.end()) it = g_cache.emplace(key, solve(name, mode)).first;
    return it->second;
}

std::vector<int> vvc_units(const Feeder& f) {
    std::vector<int> out;
    for (size_t k = 0; k < f.pv_units.size(); ++k)
        if (f.pv_units[k].has_vvc) out.push_back(static_cast<int>(k));
    return out;
}

Outcome exactness() {
    Outcome o;
    for (const auto& name : kFeeders) {
        const auto t0 = std::chrono::steady_clock::now();
        auto r = solve(name, Mode::NoVvc);
        bool relaxed = false;
        if (r.report.status == SolveStatusCode::Infeasible) {
            relaxed = true;
            r = solve(name, Mode::NoVvc, true);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& e = r.report.errors;
        o.detail += fmt::format("{}{}: soc {:.1e} dc {:.1e} de {:.1e} {:.1f}s; ", name, relaxed ? " (upper limits relaxed)" : "",
                                e.max_soc, e.max_delta_c, e.max_delta_e, secs);
        if (!r.report.converged() || e.max_soc > 1e-6 || e.max_delta_c > 1e-6 || e.max_delta_e > 1e-6 || secs > 60.0)
            o.pass = false;
    }
    return o;
}

Outcome algebraic_equivalence() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.3, 0.3);
    double worst = 0.0;
    for (const auto& name : kFeeders) {
        const Feeder& f = feeder(name);
        const auto m = build_base_model(f);
        const auto& L = m.layout;
        for (int trial = 0; trial < 100; ++trial) {
            VoltageState v = flat_start(f);
            for (size_t i = 0; i < v.mag.size(); ++i) {
                v.mag[i] = mag(rng);
                v.ang[i] += ang(rng);
            }
            std::vector<double> x(static_cast<size_t>(m.model.num_variables()), 0.0);
            for (size_t i = 0; i < v.mag.size(); ++i) x[static_cast<size_t>(L.u[i])] = v.mag[i] * v.mag[i];
            for (size_t p = 0; p < L.paths.size(); ++p) {
                const auto i = static_cast<size_t>(L.paths[p].from), j = static_cast<size_t>(L.paths[p].to);
                x[static_cast<size_t>(L.c[p])] = v.mag[i] * v.mag[j] * std::cos(v.ang[i] - v.ang[j]);
                x[static_cast<size_t>(L.e[p])] = v.mag[i] * v.mag[j] * std::sin(v.ang[i] - v.ang[j]);
            }
            for (size_t l = 0; l < f.lines.size(); ++l)
                for (int d = 0; d < 2; ++d)
                    for (size_t k = 0; k < f.lines[l].phases.size(); ++k) {
                        const auto [pe, qe] = flow_expressions(f, L, static_cast<int>(l), d, static_cast<int>(k));
                        const auto s = branch_flow(f, v, static_cast<int>(l), d, f.lines[l].phases[k]);
                        worst = std::max({worst, std::abs(pe.evaluate(x) - s.real()), std::abs(qe.evaluate(x) - s.imag())});
                    }
        }
    }
    o.detail = fmt::format("max deviation {:.2e} over 100 states per feeder", worst);
    o.pass = worst <= 1e-12;
    return o;
}

// Best objective over all zone combinations with binaries fixed.
double enumerate_zones(const StageModel& sm) {
    const size_t n = sm.vvc.size();
    size_t combos = 1;
    for (size_t k = 0; k < n; ++k) combos *= 5;
    double best = kInf;
    for (size_t c = 0; c < combos; ++c) {
        ConicModel m = sm.opf.model;
        size_t code = c;
        for (const auto& v : sm.vvc) {
            const size_t active = code % 5;
            code /= 5;
            for (size_t z = 0; z < 5; ++z) {
                const double val = z == active ? 0.0 : 1.0;
                m.set_bounds(v.z[z], val, val);
            }
        }
        const auto r = solve_socp(m);
        if (r.optimal()) best = std::min(best, r.objective);
    }
    return best;
}

Outcome misocp_correctness() {
    Outcome o;
    for (const auto& name : {"two_bus_vvc", "four_bus", "feeder30"}) {
        const Feeder& f = feeder(name);
        for (Mode mode : {Mode::VvcDefault, Mode::VvcOptimal}) {
            SolveOptions opts;
            opts.mode = mode;
            const BasePoint bp = initial_base_point(f, opts);
            const StageModel sm = build_stage_model(f, opts, bp, {}, mode == Mode::VvcOptimal ? opts.trust_radius : kInf);
            const auto bnb = solve_misocp(sm.opf.model, opts.bnb);
            const double oracle = enumerate_zones(sm);
            const bool both_infeasible = bnb.status == SolveStatus::Infeasible && std::isinf(oracle);
            const double gap = bnb.optimal() ? std::abs(bnb.objective - oracle) : kInf;
            o.detail += fmt::format("{}/{}: gap {:.1e}; ", name, to_string(mode), both_infeasible ? 0.0 : gap);
            o.require(both_infeasible || gap <= 1e-6, fmt::format("{} {} gap", name, to_string(mode)));
        }
        const auto& r = cached(name, Mode::VvcDefault);
        o.require(r.report.converged(), std::string(name) + " default solve did not converge");
        for (const auto& u : r.report.units) {
            o.require(u.zone.zeros == 1, u.name + " does not have exactly one active zone");
            o.require(u.zone.q_error <= 1e-6 && u.zone.u_violation <= 1e-6, u.name + " is off its curve");
        }
    }
    return o;
}

Outcome oracle_agreement() {
    Outcome o;
    double flow = 0.0, balance = 0.0;
    for (const auto& [name, r] : g_solves) {
        const auto rep = verify_opf_solution(feeder(name.substr(0, name.find('/'))), r.solution, 1e-4);
        flow = std::max(flow, rep.max_flow_mismatch);
        balance = std::max(balance, rep.max_balance_residual);
        o.require(rep.pass, name);
    }
    o.detail = fmt::format("{} converged solves, max flow mismatch {:.1e}, max balance residual {:.1e}", g_solves.size(), flow,
                           balance) + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

Outcome dominance() {
    Outcome o;
    const auto& d = cached("feeder30", Mode::VvcDefault).report;
    const auto& p = cached("feeder30", Mode::VvcOptimal).report;
    if (!d.converged() || !p.converged()) {
        o.pass = false;
        o.detail = "solve did not converge";
        return o;
    }
    const double saving = cost_saving(d.objective, p.objective);
    o.detail = fmt::format("objective {:.4f} -> {:.4f}, curtailment {:.2f}% -> {:.2f}%, cost saving {:.2f}%{}", d.objective,
                           p.objective, d.curtailment, p.curtailment, saving, saving > 0 ? " (strict)" : "");
    o.pass = p.objective <= d.objective + 1e-9 && p.curtailment <= d.curtailment + 1e-9 && saving >= 0.0;
    return o;
}

Outcome settings_legality() {
    Outcome o;
    double worst_raw = 0.0;
    for (const auto& name : {"two_bus_vvc", "four_bus", "feeder30"}) {
        const Feeder& f = feeder(name);
        const auto& r = cached(name, Mode::VvcOptimal);
        if (!r.report.converged()) {
            o.require(false, std::string(name) + " optimal solve did not converge");
            continue;
        }
        std::vector<VVCSettings> s;
        std::vector<int> units;
        for (size_t k = 0; k < r.report.units.size(); ++k) {
            const auto& u = r.report.units[k];
            const double s_max = f.pv_units[static_cast<size_t>(u.pv)].s_max;
            o.require(settings_in_range(u.settings, s_max), u.name + " settings outside the allowable ranges");
            const auto& raw = r.solution.vvc_settings.at(k);
            worst_raw = std::max({worst_raw, std::abs(raw.v[0] - u.settings.v1), std::abs(raw.v[1] - u.settings.v2),
                                  std::abs(raw.v[2] - u.settings.v3), std::abs(raw.v[3] - u.settings.v4),
                                  std::abs(raw.q_max - u.settings.q_max)});
            s.push_back(u.settings);
            units.push_back(u.pv);
        }
        std::vector<int> back_units;
        const auto back = settings_from_json(f, settings_to_json(f, units, s), &back_units);
        o.require(back_units == units, std::string(name) + " unit order changed");
        for (size_t k = 0; k < s.size() && k < back.size(); ++k) {
            const double d = std::max({std::abs(back[k].v1 - s[k].v1), std::abs(back[k].v2 - s[k].v2), std::abs(back[k].v3 - s[k].v3),
                                       std::abs(back[k].v4 - s[k].v4), std::abs(back[k].q_max - s[k].q_max)});
            o.require(d <= 1e-12, std::string(name) + " settings changed in the round trip");
            o.require(settings_in_range(back[k], f.pv_units[static_cast<size_t>(units[k])].s_max),
                      std::string(name) + " round-tripped settings leave the ranges");
        }
    }
    o.require(worst_raw <= 1e-8, "solver settings needed projection beyond 1e-8");
    o.detail = fmt::format("max projection distance {:.1e}", worst_raw) + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

Outcome qv_curve() {
    Outcome o;
    const VVCSettings s = default_settings(1.0);
    const double mid2 = 0.5 * (s.v1 + s.v2), mid4 = 0.5 * (s.v3 + s.v4);
    o.require(qv_reactive(0.85, s) == s.q_max && zone_of(0.85, s) == 1, "zone 1");
    o.require(std::abs(qv_reactive(mid2, s) - 0.5 * s.q_max) <= 1e-12 && zone_of(mid2, s) == 2, "zone 2");
    o.require(qv_reactive(1.0, s) == 0.0 && zone_of(1.0, s) == 3, "zone 3");
    o.require(std::abs(qv_reactive(mid4, s) + 0.5 * s.q_max) <= 1e-12 && zone_of(mid4, s) == 4, "zone 4");
    o.require(qv_reactive(1.15, s) == -s.q_max && zone_of(1.15, s) == 5, "zone 5");
    double jump = 0.0;
    for (double b : {s.v1, s.v2, s.v3, s.v4})
        jump = std::max(jump, std::abs(qv_reactive(std::nextafter(b, 0.0), s) - zone_branch(zone_of(std::nextafter(b, 0.0), s), b, s)) +
                                  std::abs(zone_branch(zone_of(std::nextafter(b, 0.0), s), b, s) - qv_reactive(b, s)));
    const double golden = qv_reactive(1.0816, s);
    o.require(jump <= 1e-12, "discontinuity");
    // the reference value is 0.6 (1.0816 - 1.0404) / (1.0404 - 1.1236) quoted to five decimals
    o.require(std::abs(golden - 0.6 * (1.0816 - 1.0404) / (1.0404 - 1.1236)) <= 1e-12, "zone-4 value");
    o.require(std::abs(std::round(golden * 1e5) / 1e5 + 0.29712) <= 1e-12, "zone-4 value to five decimals");
    o.detail = fmt::format("max breakpoint jump {:.1e}, Q(1.0816) = {:.6f}", jump, golden) + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

Outcome dynamics() {
    Outcome o;
    const Feeder& f = feeder("feeder30");
    const auto& r = cached("feeder30", Mode::VvcOptimal);
    if (!r.report.converged()) {
        o.pass = false;
        o.detail = "optimal solve did not converge";
        return o;
    }
    std::vector<VVCSettings> s;
    for (const auto& u : r.report.units) s.push_back(u.settings);
    const Verdict good = stability_verdict(simulate(f, s, default_schedule()), 20, 1e-6);
    std::vector<VVCSettings> bad;
    for (int pv : vvc_units(f)) {
        VVCSettings p;
        p.v1 = 1.08;
        p.v2 = 1.12;
        p.v3 = 1.12;
        p.v4 = 1.121;
        p.q_max = f.pv_units[static_cast<size_t>(pv)].s_max;
        bad.push_back(p);
    }
    const Verdict patho = stability_verdict(simulate(f, bad, default_schedule()), 20, 1e-6);
    o.detail = fmt::format("optimal settings {}, zero-deadband maximum-slope settings {}", to_string(good), to_string(patho));
    o.pass = good == Verdict::Stable && patho == Verdict::Oscillatory;
    return o;
}

// Objective of the 2-bus feeder with PV output p and Q on the curve, or +inf when infeasible.
double grid_point(const Feeder& f, double p, const VVCSettings& s) {
    const auto& unit = f.pv_units[0];
    const int node = f.node_index(unit.node);
    const double cap = std::sqrt(std::max(0.0, unit.s_max * unit.s_max - p * p));
    auto state = [&](double q) { return solve_power_flow(f, {{p, q}}, {.tol = 1e-13}).v; };
    auto residual = [&](double q) {
        const double m = state(q).mag[static_cast<size_t>(node)];
        return q - qv_saturated(m * m, s);
    };
    double lo = -s.q_max, hi = s.q_max;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (residual(mid) > 0 ? hi : lo) = mid;
    }
    const double q = 0.5 * (lo + hi);
    if (std::abs(q) > cap) return kInf;
    const VoltageState v = state(q);
    const double u = v.mag[static_cast<size_t>(node)] * v.mag[static_cast<size_t>(node)];
    const auto& bus = f.bus_of(node);
    if (u < bus.v_min * bus.v_min || u > bus.v_max * bus.v_max || u < s.v_L || u >= s.v_H) return kInf;
    const double p_sub = branch_flow(f, v, 0, 0, unit.node.phase).real();
    const double demand = f.node_demand()[static_cast<size_t>(node)].real();
    return f.prices.grid_per_mwh * f.mva_base * p_sub + f.prices.pv_per_mwh * f.mva_base * (p - demand);
}

Outcome brute_force() {
    Outcome o;
    const Feeder& f = feeder("two_bus_vvc");
    const auto& r = cached("two_bus_vvc", Mode::VvcDefault);
    const VVCSettings s = default_settings(f.pv_units[0].s_max);
    double best = kInf, best_p = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double p = f.pv_units[0].p_max * k / 199.0;
        const double obj = grid_point(f, p, s);
        if (obj < best) {
            best = obj;
            best_p = p;
        }
    }
    const double gap = std::abs(r.report.objective - best);
    o.detail = fmt::format("solve {:.6f}, grid {:.6f} at P = {:.1f} kW, gap {:.1e}", r.report.objective, best,
                           best_p * f.mva_base * 1000.0, gap);
    o.pass = r.report.converged() && gap <= 1e-3;
    return o;
}

Outcome determinism() {
    Outcome o;
    int cases = 0;
    auto same = [&](const std::string& what, const std::function<std::string()>& run) {
        ++cases;
        const std::string a = run(), b = run();
        o.require(a == b, what);
    };
    for (const auto& [name, mode] : std::vector<std::pair<std::string, Mode>>{
             {"four_bus", Mode::NoVvc}, {"four_bus", Mode::VvcOptimal}, {"feeder30", Mode::VvcDefault}, {"two_bus_vvc", Mode::VvcDefault}})
        same(name + "/" + to_string(mode), [&] {
            SolveOptions opts;
            opts.mode = mode;
            const auto r = two_stage_solve(feeder(name), opts);
            return r.report.to_json() + r.report.trace_csv() + path_errors_csv(feeder(name), r.solution);
        });
    same("feeder30 simulation", [&] {
        const Feeder& f = feeder("feeder30");
        std::vector<VVCSettings> s;
        for (int pv : vvc_units(f)) s.push_back(default_settings(f.pv_units[static_cast<size_t>(pv)].s_max));
        return simulate(f, s, default_schedule()).to_csv(f);
    });
    o.detail = fmt::format("{} cases repeated", cases) + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"exactness", exactness},
        {"algebraic equivalence", algebraic_equivalence},
        {"misocp correctness", misocp_correctness},
        {"default vs optimal dominance", dominance},
        {"settings legality", settings_legality},
        {"q-v curve", qv_curve},
        {"dynamics stability", dynamics},
        {"brute-force end-to-end", brute_force},
        {"determinism", determinism},
    };
    // Criterion numbering follows the acceptance list; oracle agreement (2) runs after every solve.
    const std::vector<int> numbers{1, 3, 4, 5, 6, 7, 8, 9, 10};
    std::map<int, std::pair<std::string, Outcome>> results;
    for (size_t k = 0; k < criteria.size(); ++k) {
        Outcome out;
        try {
            out = criteria[k].second();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        results[numbers[k]] = {criteria[k].first, out};
    }
    results[2] = {"oracle agreement", oracle_agreement()};
    bool all = true;
    for (const auto& [n, r] : results) {
        std::printf("criterion %2d %s %s: %s\n", n, r.second.pass ? "PASS" : "FAIL", r.first.c_str(), r.second.detail.c_str());
        all = all && r.second.pass;
    }
    std::fflush(stdout);
    return all ? 0 : 1;
}
