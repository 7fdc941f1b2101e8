#include "socpf/opf_model.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "socpf/common.hpp"

namespace socpf {

std::vector<AuxPath> enumerate_aux_paths(const Feeder& f) {
    std::vector<AuxPath> out;
    std::set<std::pair<int, int>> seen;
    auto add = [&](int a, int b) {
        if (seen.insert({a, b}).second) out.push_back({a, b});
    };
    for (const auto& line : f.lines) {
        for (const auto* bus : {&line.from, &line.to})
            for (Phase p : line.phases)
                for (Phase q : line.phases)
                    if (p != q) add(f.node_index(*bus, p), f.node_index(*bus, q));
        for (Phase p : line.phases)
            for (Phase q : line.phases) {
                add(f.node_index(line.from, p), f.node_index(line.to, q));
                add(f.node_index(line.to, q), f.node_index(line.from, p));
            }
    }
    return out;
}

BasePoint base_point_from(const VoltageState& v) {
    BasePoint bp;
    bp.u0.resize(v.mag.size());
    for (size_t i = 0; i < v.mag.size(); ++i) bp.u0[i] = v.mag[i] * v.mag[i];
    bp.theta0 = v.ang;
    return bp;
}

int OpfLayout::path_id(int from, int to) const {
    auto it = path_lookup.find({from, to});
    if (it == path_lookup.end()) throw PreconditionError("no auxiliary path between the given nodes");
    return it->second;
}

namespace {

std::string tag(const Feeder& f, int node) { return f.node(node).str(); }

std::string path_tag(const Feeder& f, const AuxPath& p) { return tag(f, p.from) + "," + tag(f, p.to); }

}  // namespace

std::pair<LinearExpr, LinearExpr> flow_expressions(const Feeder& f, const OpfLayout& L, int line_index, int direction,
                                                   int k) {
    const auto& line = f.lines[static_cast<size_t>(line_index)];
    const std::string& here = direction == 0 ? line.from : line.to;
    const std::string& there = direction == 0 ? line.to : line.from;
    const Phase ph = line.phases[static_cast<size_t>(k)];
    const int i = f.node_index(here, ph);
    LinearExpr p, q;
    const double gs = line.g(k, k), bs = line.b(k, k);
    p.add(L.u[static_cast<size_t>(i)], gs);
    q.add(L.u[static_cast<size_t>(i)], -bs);
    for (size_t m = 0; m < line.phases.size(); ++m) {
        const double g = line.g(k, static_cast<Eigen::Index>(m)), b = line.b(k, static_cast<Eigen::Index>(m));
        if (static_cast<int>(m) != k) {
            const int pid = L.path_id(i, f.node_index(here, line.phases[m]));
            const VarId c = L.c[static_cast<size_t>(pid)], e = L.e[static_cast<size_t>(pid)];
            p.add(c, g).add(e, b);
            q.add(e, g).add(c, -b);
        }
        const int pid = L.path_id(i, f.node_index(there, line.phases[m]));
        const VarId c = L.c[static_cast<size_t>(pid)], e = L.e[static_cast<size_t>(pid)];
        p.add(c, -g).add(e, -b);
        q.add(e, -g).add(c, b);
    }
    return {p, q};
}

OpfModel build_base_model(const Feeder& f, const ModelOptions& opts) {
    OpfModel out;
    auto& M = out.model;
    auto& L = out.layout;
    const int n = f.num_nodes();

    for (int i = 0; i < n; ++i) L.node_names.push_back(tag(f, i));
    L.u.resize(static_cast<size_t>(n));
    L.theta.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& bus = f.bus_of(i);
        if (f.is_substation_node(i)) {
            const auto vs = f.substation_voltage(i);
            const double mag = std::abs(vs);
            L.u[static_cast<size_t>(i)] = M.add_variable("u[" + tag(f, i) + "]", mag * mag, mag * mag);
            L.theta[static_cast<size_t>(i)] = M.add_variable("th[" + tag(f, i) + "]", std::arg(vs), std::arg(vs));
        } else {
            const double ub = opts.relax_upper_voltage ? kInf : bus.v_max * bus.v_max;
            L.u[static_cast<size_t>(i)] = M.add_variable("u[" + tag(f, i) + "]", bus.v_min * bus.v_min, ub);
            L.theta[static_cast<size_t>(i)] = M.add_variable("th[" + tag(f, i) + "]");
        }
    }

    L.paths = enumerate_aux_paths(f);
    const int np = static_cast<int>(L.paths.size());
    for (int p = 0; p < np; ++p) L.path_lookup[{L.paths[static_cast<size_t>(p)].from, L.paths[static_cast<size_t>(p)].to}] = p;
    L.reverse.resize(static_cast<size_t>(np));
    L.c.resize(static_cast<size_t>(np));
    L.e.resize(static_cast<size_t>(np));
    for (int p = 0; p < np; ++p) {
        const auto& path = L.paths[static_cast<size_t>(p)];
        L.reverse[static_cast<size_t>(p)] = L.path_id(path.to, path.from);
        L.c[static_cast<size_t>(p)] = M.add_variable("c[" + path_tag(f, path) + "]");
        L.e[static_cast<size_t>(p)] = M.add_variable("e[" + path_tag(f, path) + "]");
    }
    for (int p = 0; p < np; ++p) {
        if (!L.canonical(p)) continue;
        const int r = L.reverse[static_cast<size_t>(p)];
        const std::string t = path_tag(f, L.paths[static_cast<size_t>(p)]);
        LinearExpr cs, es;
        cs.add(L.c[static_cast<size_t>(p)], 1.0).add(L.c[static_cast<size_t>(r)], -1.0);
        es.add(L.e[static_cast<size_t>(p)], 1.0).add(L.e[static_cast<size_t>(r)], 1.0);
        M.add_row("sym_c[" + t + "]", cs, Sense::Eq, 0.0);
        M.add_row("sym_e[" + t + "]", es, Sense::Eq, 0.0);
    }

    // flows
    std::vector<LinearExpr> p_out(static_cast<size_t>(n)), q_out(static_cast<size_t>(n));
    L.p_flow.resize(f.lines.size());
    L.q_flow.resize(f.lines.size());
    for (size_t l = 0; l < f.lines.size(); ++l) {
        const auto& line = f.lines[l];
        for (int d = 0; d < 2; ++d) {
            const std::string& here = d == 0 ? line.from : line.to;
            const std::string& there = d == 0 ? line.to : line.from;
            for (size_t k = 0; k < line.phases.size(); ++k) {
                const std::string t = here + "->" + there + "." + phase_char(line.phases[k]);
                const VarId pv = M.add_variable("P[" + t + "]");
                const VarId qv = M.add_variable("Q[" + t + "]");
                L.p_flow[l][static_cast<size_t>(d)].push_back(pv);
                L.q_flow[l][static_cast<size_t>(d)].push_back(qv);
                auto [pe, qe] = flow_expressions(f, L, static_cast<int>(l), d, static_cast<int>(k));
                pe.add(pv, -1.0);
                qe.add(qv, -1.0);
                M.add_row("flow_p[" + t + "]", pe, Sense::Eq, 0.0);
                M.add_row("flow_q[" + t + "]", qe, Sense::Eq, 0.0);
                const auto node = static_cast<size_t>(f.node_index(here, line.phases[k]));
                p_out[node].add(pv, 1.0);
                q_out[node].add(qv, 1.0);
            }
        }
    }

    // injections
    LinearExpr obj;
    const double grid = f.prices.grid_per_mwh * f.mva_base;
    const double pvp = f.prices.pv_per_mwh * f.mva_base;
    L.p_sub.assign(static_cast<size_t>(n), -1);
    L.q_sub.assign(static_cast<size_t>(n), -1);
    std::vector<LinearExpr> p_in(static_cast<size_t>(n)), q_in(static_cast<size_t>(n));
    for (int i : f.substation_nodes()) {
        const auto s = static_cast<size_t>(i);
        L.p_sub[s] = M.add_variable("Pg[" + tag(f, i) + "]");
        L.q_sub[s] = M.add_variable("Qg[" + tag(f, i) + "]");
        p_in[s].add(L.p_sub[s], 1.0);
        q_in[s].add(L.q_sub[s], 1.0);
        obj.add(L.p_sub[s], grid);
    }
    const auto demand = f.node_demand();
    for (const auto& pv : f.pv_units) {
        const auto s = static_cast<size_t>(f.node_index(pv.node));
        const bool dispatch = opts.vvc_dispatch && pv.has_vvc;
        const VarId p = dispatch ? M.add_variable("Ppv[" + pv.name + "]", 0.0, pv.p_max)
                                 : M.add_variable("Ppv[" + pv.name + "]", pv.p_max, pv.p_max);
        const VarId q = dispatch ? M.add_variable("Qpv[" + pv.name + "]") : M.add_variable("Qpv[" + pv.name + "]", 0.0, 0.0);
        L.pv_p.push_back(p);
        L.pv_q.push_back(q);
        p_in[s].add(p, 1.0);
        q_in[s].add(q, 1.0);
        obj.add(p, pvp);
        obj.constant -= pvp * demand[s].real();
    }
    M.set_objective(obj);

    for (int i = 0; i < n; ++i) {
        const auto s = static_cast<size_t>(i);
        LinearExpr pb = p_in[s], qb = q_in[s];
        pb.add(p_out[s], -1.0);
        qb.add(q_out[s], -1.0);
        M.add_row("bal_p[" + tag(f, i) + "]", pb, Sense::Eq, demand[s].real());
        M.add_row("bal_q[" + tag(f, i) + "]", qb, Sense::Eq, demand[s].imag());
    }
    return out;
}

TaylorCoefficients taylor_coefficients(double u0_i, double u0_j, double d0) {
    if (!(u0_i > 0) || !(u0_j > 0)) throw PreconditionError("Taylor base point needs positive squared magnitudes");
    const double s = std::sqrt(u0_i * u0_j);
    const double ri = std::sqrt(u0_j) / (2.0 * std::sqrt(u0_i));
    const double rj = std::sqrt(u0_i) / (2.0 * std::sqrt(u0_j));
    const double cs = std::cos(d0), sn = std::sin(d0);
    TaylorCoefficients t;
    t.c_const = s * d0 * sn;
    t.c_ui = ri * cs;
    t.c_uj = rj * cs;
    t.c_dth = -s * sn;
    t.e_const = -s * d0 * cs;
    t.e_ui = ri * sn;
    t.e_uj = rj * sn;
    t.e_dth = s * cs;
    return t;
}

std::array<LinearRow, 2> taylor_bounds(const OpfLayout& L, int path, const BasePoint& bp) {
    const auto& p = L.paths.at(static_cast<size_t>(path));
    const auto i = static_cast<size_t>(p.from), j = static_cast<size_t>(p.to);
    const auto t = taylor_coefficients(bp.u0[i], bp.u0[j], bp.theta0[i] - bp.theta0[j]);
    LinearRow rc, re;
    rc.expr.add(L.c[static_cast<size_t>(path)], 1.0)
        .add(L.u[i], -t.c_ui)
        .add(L.u[j], -t.c_uj)
        .add(L.theta[i], -t.c_dth)
        .add(L.theta[j], t.c_dth);
    rc.sense = Sense::Eq;
    rc.rhs = t.c_const;
    re.expr.add(L.e[static_cast<size_t>(path)], 1.0)
        .add(L.u[i], -t.e_ui)
        .add(L.u[j], -t.e_uj)
        .add(L.theta[i], -t.e_dth)
        .add(L.theta[j], t.e_dth);
    re.sense = Sense::Eq;
    re.rhs = t.e_const;
    return {rc, re};
}

void add_taylor_bounds(OpfModel& m, const BasePoint& bp) {
    for (int p = 0; p < static_cast<int>(m.layout.paths.size()); ++p) {
        if (!m.layout.canonical(p)) continue;
        auto rows = taylor_bounds(m.layout, p, bp);
        const std::string t = std::to_string(p);
        m.model.add_row("taylor_c[" + t + "]", std::move(rows[0].expr), Sense::Eq, rows[0].rhs);
        m.model.add_row("taylor_e[" + t + "]", std::move(rows[1].expr), Sense::Eq, rows[1].rhs);
    }
}

std::string cone_name(const OpfLayout& L, int path) {
    const int canon = std::min(path, L.reverse.at(static_cast<size_t>(path)));
    const auto& p = L.paths[static_cast<size_t>(canon)];
    return "soc[" + L.node_names[static_cast<size_t>(p.from)] + "," + L.node_names[static_cast<size_t>(p.to)] + "]";
}

bool add_soc_cone(OpfModel& m, int path) {
    const auto& L = m.layout;
    const int canon = std::min(path, L.reverse.at(static_cast<size_t>(path)));
    const auto& p = L.paths[static_cast<size_t>(canon)];
    SocConstraint cone;
    cone.name = cone_name(L, canon);
    if (m.model.has_cone(cone.name)) return false;
    const VarId ui = L.u[static_cast<size_t>(p.from)], uj = L.u[static_cast<size_t>(p.to)];
    cone.head.add(ui, 1.0).add(uj, 1.0);
    LinearExpr t1, t2, t3;
    t1.add(L.c[static_cast<size_t>(canon)], 2.0);
    t2.add(L.e[static_cast<size_t>(canon)], 2.0);
    t3.add(ui, 1.0).add(uj, -1.0);
    cone.tail = {t1, t2, t3};
    return m.model.add_cone(std::move(cone));
}

VoltageState recover_voltages(const Feeder& f, std::span<const double> u, std::span<const double> theta) {
    VoltageState v;
    v.mag.resize(u.size());
    v.ang.assign(theta.begin(), theta.end());
    for (size_t i = 0; i < u.size(); ++i) {
        if (f.is_substation_node(static_cast<int>(i))) {
            const auto vs = f.substation_voltage(static_cast<int>(i));
            v.mag[i] = std::abs(vs);
            v.ang[i] = std::arg(vs);
            continue;
        }
        double ui = u[i];
        if (ui < 0) {
            if (ui < -1e-9) throw InputError("invalid solution: negative squared voltage at " + f.node(static_cast<int>(i)).str());
            spdlog::warn("clamping squared voltage {:.3e} at {} to zero", ui, f.node(static_cast<int>(i)).str());
            ui = 0.0;
        }
        v.mag[i] = std::sqrt(ui);
    }
    return v;
}

OPFSolution extract_solution(const Feeder& f, const OpfModel& m, std::span<const double> x, double objective) {
    const auto& L = m.layout;
    OPFSolution s;
    s.x.assign(x.begin(), x.end());
    s.paths = L.paths;
    s.objective = objective;
    auto val = [&](VarId v) { return x[static_cast<size_t>(v)]; };
    for (VarId v : L.u) s.u.push_back(val(v));
    for (VarId v : L.theta) s.theta.push_back(val(v));
    for (VarId v : L.c) s.c.push_back(val(v));
    for (VarId v : L.e) s.e.push_back(val(v));
    s.v = recover_voltages(f, s.u, s.theta);
    s.flows.resize(f.lines.size());
    for (size_t l = 0; l < f.lines.size(); ++l)
        for (size_t d = 0; d < 2; ++d)
            for (size_t k = 0; k < L.p_flow[l][d].size(); ++k)
                s.flows[l].s[d].emplace_back(val(L.p_flow[l][d][k]), val(L.q_flow[l][d][k]));
    s.substation.assign(static_cast<size_t>(f.num_nodes()), 0.0);
    for (size_t i = 0; i < L.p_sub.size(); ++i)
        if (L.p_sub[i] >= 0) s.substation[i] = {val(L.p_sub[i]), val(L.q_sub[i])};
    for (size_t k = 0; k < L.pv_p.size(); ++k) s.pv.emplace_back(val(L.pv_p[k]), val(L.pv_q[k]));
    std::vector<PathValues> pv;
    pv.reserve(L.paths.size());
    for (const auto& p : L.paths) pv.push_back({p.from, p.to});
    s.errors = kernels::path_errors(pv, s.u, s.theta, s.c, s.e);
    return s;
}

double soc_error(const OPFSolution& sol, int path) {
    const auto& p = sol.paths.at(static_cast<size_t>(path));
    const double c = sol.c[static_cast<size_t>(path)], e = sol.e[static_cast<size_t>(path)];
    return sol.u[static_cast<size_t>(p.from)] * sol.u[static_cast<size_t>(p.to)] - c * c - e * e;
}

std::pair<double, double> linearization_error(const OPFSolution& sol, int path) {
    const auto& p = sol.paths.at(static_cast<size_t>(path));
    const auto i = static_cast<size_t>(p.from), j = static_cast<size_t>(p.to);
    const double m = std::sqrt(std::max(sol.u[i], 0.0) * std::max(sol.u[j], 0.0));
    const double d = sol.theta[i] - sol.theta[j];
    return {std::abs(sol.c[static_cast<size_t>(path)] - m * std::cos(d)),
            std::abs(sol.e[static_cast<size_t>(path)] - m * std::sin(d))};
}

ErrorSummary summarize_errors(const std::vector<PathErrorValues>& errors) {
    ErrorSummary s;
    for (const auto& e : errors) {
        s.max_soc = std::max(s.max_soc, std::abs(e.soc_error));
        s.max_delta_c = std::max(s.max_delta_c, e.delta_c);
        s.max_delta_e = std::max(s.max_delta_e, e.delta_e);
    }
    return s;
}

std::string path_errors_csv(const Feeder& f, const OPFSolution& sol) {
    std::ostringstream out;
    out.precision(10);
    out << "from,to,soc_error,delta_c,delta_e\n";
    for (size_t p = 0; p < sol.paths.size(); ++p) {
        const auto& e = sol.errors[p];
        out << f.node(sol.paths[p].from).str() << ',' << f.node(sol.paths[p].to).str() << ',' << e.soc_error << ','
            << e.delta_c << ',' << e.delta_e << '\n';
    }
    return out.str();
}

}  // namespace socpf
