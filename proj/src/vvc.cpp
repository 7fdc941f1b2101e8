#include "socpf/vvc.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "socpf/common.hpp"

namespace socpf {

void VVCSettings::validate() const {
    if (!(v_L < v1 && v1 < v2 && v2 <= v3 && v3 < v4 && v4 < v_H))
        throw PreconditionError("VVC settings must satisfy v_L < v1 < v2 <= v3 < v4 < v_H");
    if (!(q_max >= 0)) throw PreconditionError("VVC q_max must be nonnegative");
}

VVCSettings default_settings(double s_max) {
    if (!(s_max > 0)) throw PreconditionError("s_max must be positive");
    VVCSettings s;
    s.q_max = 0.6 * s_max;
    return s;
}

bool settings_in_range(const VVCSettings& s, double s_max) {
    using R = SettingRanges;
    return R::v1_min <= s.v1 && s.v1 <= s.v2 - R::min_gap && R::v2_min <= s.v2 && s.v2 <= R::v2_max &&
           R::v3_min <= s.v3 && s.v3 <= R::v3_max && s.v3 + R::min_gap <= s.v4 && s.v4 <= R::v4_max &&
           0.0 <= s.q_max && s.q_max <= s_max;
}

VVCSettings project_to_ranges(VVCSettings s, double s_max) {
    using R = SettingRanges;
    s.v2 = std::clamp(s.v2, R::v2_min, R::v2_max);
    s.v3 = std::clamp(s.v3, R::v3_min, R::v3_max);
    s.v1 = std::clamp(s.v1, R::v1_min, s.v2 - R::min_gap);
    s.v4 = std::clamp(s.v4, s.v3 + R::min_gap, R::v4_max);
    s.q_max = std::clamp(s.q_max, 0.0, s_max);
    return s;
}

int zone_of(double u, const VVCSettings& s) {
    if (!(u >= s.v_L && u < s.v_H)) throw PreconditionError("voltage outside the continuous operation range");
    if (u < s.v1) return 1;
    if (u < s.v2) return 2;
    if (u < s.v3) return 3;
    if (u < s.v4) return 4;
    return 5;
}

double zone_branch(int zone, double u, const VVCSettings& s) {
    switch (zone) {
        case 1: return s.q_max;
        case 2: return s.q_max / (s.v2 - s.v1) * (s.v2 - u);
        case 3: return 0.0;
        case 4: return s.q_max / (s.v3 - s.v4) * (u - s.v3);
        case 5: return -s.q_max;
        default: throw PreconditionError("zone index must be 1..5");
    }
}

double qv_reactive(double u, const VVCSettings& s) { return zone_branch(zone_of(u, s), u, s); }

double qv_saturated(double u, const VVCSettings& s) {
    if (u < s.v_L) return s.q_max;
    if (u >= s.v_H) return -s.q_max;
    return qv_reactive(u, s);
}

BigM default_big_m(const VVCSettings& s, double s_max) {
    double branch = s.q_max;
    for (double u : {s.v_L, s.v_H}) branch = std::max({branch, std::abs(zone_branch(2, u, s)), std::abs(zone_branch(4, u, s))});
    return {s.v_H - s.v_L + 0.1, 1.1 * (s_max + branch)};
}

BigM optimal_big_m(const VVCSettings& s, double s_max) {
    using R = SettingRanges;
    const double lo = std::min(s.v_L, R::v1_min), hi = std::max(s.v_H, R::v4_max);
    const BigM base = default_big_m(s, s_max);
    return {std::max(base.m_v, hi - lo + 0.1), std::max(base.m_q, s_max * (1.0 + (s.v_H - s.v_L) / R::min_gap))};
}

void add_capability(OpfModel& m, const Feeder& f, int pv) {
    const auto& unit = f.pv_units.at(static_cast<size_t>(pv));
    if (!unit.has_vvc) throw PreconditionError("capability limits apply to VVC units only");
    const VarId p = m.layout.pv_p[static_cast<size_t>(pv)], q = m.layout.pv_q[static_cast<size_t>(pv)];
    const auto& var = m.model.variable(p);
    m.model.set_bounds(p, std::max(var.lb, 0.0), std::min(var.ub, unit.p_max));
    SocConstraint cone;
    cone.name = "cap[" + unit.name + "]";
    cone.head = LinearExpr(unit.s_max);
    LinearExpr tp, tq;
    tp.add(p, 1.0);
    tq.add(q, 1.0);
    cone.tail = {tp, tq};
    m.model.add_cone(std::move(cone));
}

namespace {

// Largest |f_lin| over the boxes of q_max, u and the two breakpoints.
double f_lin_bound(const FLinear& f, double s_max, double u_lo, double u_hi, std::array<double, 2> a,
                   std::array<double, 2> b) {
    auto span = [](double c, double lo, double hi) { return std::make_pair(std::min(c * lo, c * hi), std::max(c * lo, c * hi)); };
    double lo = 0.0, hi = 0.0;
    for (const auto& [l, h] : {span(f.q, 0.0, s_max), span(f.u, u_lo, u_hi), span(f.va, a[0], a[1]), span(f.vb, b[0], b[1])}) {
        lo += l;
        hi += h;
    }
    return std::max(std::abs(lo), std::abs(hi));
}

struct ZoneBuilder {
    ConicModel& model;
    std::string unit;
    int rows = 0;

    // -M z <= expr <= M z
    void two_sided(const std::string& name, const LinearExpr& expr, VarId z, double M) {
        LinearExpr hi = expr, lo = expr;
        hi.add(z, -M);
        lo.add(z, M);
        model.add_row(name + "_hi[" + unit + "]", hi, Sense::Le, 0.0);
        model.add_row(name + "_lo[" + unit + "]", lo, Sense::Ge, 0.0);
        rows += 2;
    }
    // expr - M z <= 0
    void upper(const std::string& name, LinearExpr expr, VarId z, double M) {
        expr.add(z, -M);
        model.add_row(name + "[" + unit + "]", expr, Sense::Le, 0.0);
        ++rows;
    }
    // expr + M z >= 0
    void lower(const std::string& name, LinearExpr expr, VarId z, double M) {
        expr.add(z, M);
        model.add_row(name + "[" + unit + "]", expr, Sense::Ge, 0.0);
        ++rows;
    }
};

LinearExpr var_minus(VarId a, VarId b) {
    LinearExpr e;
    e.add(a, 1.0).add(b, -1.0);
    return e;
}

LinearExpr var_plus_const(VarId a, double c) {
    LinearExpr e(c);
    e.add(a, 1.0);
    return e;
}

VvcVars common_vars(OpfModel& m, const Feeder& f, int pv, const VVCSettings& s) {
    const auto& unit = f.pv_units.at(static_cast<size_t>(pv));
    VvcVars v;
    v.pv = pv;
    v.node = f.node_index(unit.node);
    for (int n = 0; n < 5; ++n)
        v.z[static_cast<size_t>(n)] =
            m.model.add_variable("z" + std::to_string(n + 1) + "[" + unit.name + "]", 0.0, 1.0, VarKind::Binary);
    LinearExpr card;
    for (VarId z : v.z) card.add(z, 1.0);
    m.model.add_row("zone_card[" + unit.name + "]", card, Sense::Le, 4.0);
    m.model.add_exclusive_zero_group({v.z.begin(), v.z.end()});
    LinearExpr u;
    u.add(m.layout.u[static_cast<size_t>(v.node)], 1.0);
    m.model.add_row("vcont_lo[" + unit.name + "]", u, Sense::Ge, s.v_L);
    m.model.add_row("vcont_hi[" + unit.name + "]", u, Sense::Le, s.v_H);
    add_capability(m, f, pv);
    return v;
}

}  // namespace

VvcVars add_default_vvc(OpfModel& m, const Feeder& f, int pv, const VVCSettings& s, const BigM& M) {
    s.validate();
    VvcVars v = common_vars(m, f, pv, s);
    const VarId u = m.layout.u[static_cast<size_t>(v.node)];
    const VarId q = m.layout.pv_q[static_cast<size_t>(pv)];
    ZoneBuilder b{m.model, f.pv_units[static_cast<size_t>(pv)].name};
    const auto& z = v.z;

    b.upper("z1_u", var_plus_const(u, -s.v1), z[0], M.m_v);
    b.two_sided("z1_q", var_plus_const(q, -s.q_max), z[0], M.m_q);

    b.lower("z2_ulo", var_plus_const(u, -s.v1), z[1], M.m_v);
    b.upper("z2_uhi", var_plus_const(u, -s.v2), z[1], M.m_v);
    {
        const double k = s.q_max / (s.v2 - s.v1);
        LinearExpr e(-k * s.v2);
        e.add(q, 1.0).add(u, k);
        b.two_sided("z2_q", e, z[1], M.m_q);
    }

    b.lower("z3_ulo", var_plus_const(u, -s.v2), z[2], M.m_v);
    b.upper("z3_uhi", var_plus_const(u, -s.v3), z[2], M.m_v);
    b.two_sided("z3_q", var_plus_const(q, 0.0), z[2], M.m_q);

    b.lower("z4_ulo", var_plus_const(u, -s.v3), z[3], M.m_v);
    b.upper("z4_uhi", var_plus_const(u, -s.v4), z[3], M.m_v);
    {
        const double k = s.q_max / (s.v3 - s.v4);
        LinearExpr e(k * s.v3);
        e.add(q, 1.0).add(u, -k);
        b.two_sided("z4_q", e, z[3], M.m_q);
    }

    b.lower("z5_u", var_plus_const(u, -s.v4), z[4], M.m_v);
    b.two_sided("z5_q", var_plus_const(q, s.q_max), z[4], M.m_q);
    v.zone_rows = b.rows;
    return v;
}

FLinear linearize_f(const VvcBase& bp, double u0, int which) {
    const double q0 = bp.q_max;
    FLinear f;
    if (which == 2) {
        const double v1 = bp.v[0], v2 = bp.v[1], d = v2 - v1;
        if (d == 0.0) throw PreconditionError("degenerate base point: v1 equals v2");
        f.q = (v2 - u0) / d;
        f.u = -q0 / d;
        f.va = q0 * (v2 - u0) / (d * d);
        f.vb = -q0 * (v1 - u0) / (d * d);
    } else if (which == 4) {
        const double v3 = bp.v[2], v4 = bp.v[3], d = v3 - v4;
        if (d == 0.0) throw PreconditionError("degenerate base point: v3 equals v4");
        f.q = (u0 - v3) / d;
        f.u = q0 / d;
        f.va = -q0 * (u0 - v4) / (d * d);
        f.vb = q0 * (u0 - v3) / (d * d);
    } else {
        throw PreconditionError("linearize_f expects which = 2 or 4");
    }
    return f;
}

double f_exact(int which, double q, double u, double va, double vb) {
    if (which == 2) return q * (vb - u) / (vb - va);
    if (which == 4) return q * (u - va) / (va - vb);
    throw PreconditionError("f_exact expects which = 2 or 4");
}

VvcVars add_optimal_vvc(OpfModel& m, const Feeder& f, int pv, const VvcBase& bp, double u0, const VVCSettings& limits,
                        const BigM& M) {
    using R = SettingRanges;
    const auto& unit = f.pv_units.at(static_cast<size_t>(pv));
    VvcVars v = common_vars(m, f, pv, limits);
    const VarId u = m.layout.u[static_cast<size_t>(v.node)];
    const VarId q = m.layout.pv_q[static_cast<size_t>(pv)];
    auto& model = m.model;
    const std::string t = "[" + unit.name + "]";
    v.v[0] = model.add_variable("vs1" + t, R::v1_min, kInf);
    v.v[1] = model.add_variable("vs2" + t, R::v2_min, R::v2_max);
    v.v[2] = model.add_variable("vs3" + t, R::v3_min, R::v3_max);
    v.v[3] = model.add_variable("vs4" + t, -kInf, R::v4_max);
    v.q_max = model.add_variable("qs" + t, 0.0, unit.s_max);
    {
        LinearExpr e;
        e.add(v.v[0], 1.0).add(v.v[1], -1.0);
        model.add_row("range_v1" + t, e, Sense::Le, -R::min_gap);
        LinearExpr e2;
        e2.add(v.v[2], 1.0).add(v.v[3], -1.0);
        model.add_row("range_v4" + t, e2, Sense::Le, -R::min_gap);
    }

    ZoneBuilder b{model, unit.name};
    const auto& z = v.z;
    const auto& sv = v.v;
    b.upper("z1_u", var_minus(u, sv[0]), z[0], M.m_v);
    b.two_sided("z1_q", var_minus(q, v.q_max), z[0], M.m_q);

    b.lower("z2_ulo", var_minus(u, sv[0]), z[1], M.m_v);
    b.upper("z2_uhi", var_minus(u, sv[1]), z[1], M.m_v);
    {
        const FLinear f2 = linearize_f(bp, u0, 2);
        LinearExpr e;
        e.add(q, 1.0).add(v.q_max, -f2.q).add(u, -f2.u).add(sv[0], -f2.va).add(sv[1], -f2.vb);
        const double bound = f_lin_bound(f2, unit.s_max, limits.v_L, limits.v_H, {R::v1_min, R::v2_max - R::min_gap},
                                         {R::v2_min, R::v2_max});
        b.two_sided("z2_q", e, z[1], std::max(M.m_q, 1.1 * (unit.s_max + bound)));
    }

    b.lower("z3_ulo", var_minus(u, sv[1]), z[2], M.m_v);
    b.upper("z3_uhi", var_minus(u, sv[2]), z[2], M.m_v);
    b.two_sided("z3_q", var_plus_const(q, 0.0), z[2], M.m_q);

    b.lower("z4_ulo", var_minus(u, sv[2]), z[3], M.m_v);
    b.upper("z4_uhi", var_minus(u, sv[3]), z[3], M.m_v);
    {
        const FLinear f4 = linearize_f(bp, u0, 4);
        LinearExpr e;
        e.add(q, 1.0).add(v.q_max, -f4.q).add(u, -f4.u).add(sv[2], -f4.va).add(sv[3], -f4.vb);
        const double bound = f_lin_bound(f4, unit.s_max, limits.v_L, limits.v_H, {R::v3_min, R::v3_max},
                                         {R::v3_min + R::min_gap, R::v4_max});
        b.two_sided("z4_q", e, z[3], std::max(M.m_q, 1.1 * (unit.s_max + bound)));
    }

    b.lower("z5_u", var_minus(u, sv[3]), z[4], M.m_v);
    {
        LinearExpr e;
        e.add(q, 1.0).add(v.q_max, 1.0);
        b.two_sided("z5_q", e, z[4], M.m_q);
    }
    v.zone_rows = b.rows;
    return v;
}

ZoneCheck check_zone(double u, double q, const std::array<double, 5>& z, const VVCSettings& s, double tol) {
    ZoneCheck c;
    for (int n = 0; n < 5; ++n) {
        const double zn = z[static_cast<size_t>(n)];
        if (std::abs(zn) <= tol) {
            ++c.zeros;
            if (c.active_zone == 0) c.active_zone = n + 1;
        } else if (std::abs(zn - 1.0) > tol) {
            return c;
        }
    }
    if (c.zeros != 1) return c;
    const std::array<double, 6> edges{s.v_L, s.v1, s.v2, s.v3, s.v4, s.v_H};
    const double lo = edges[static_cast<size_t>(c.active_zone - 1)], hi = edges[static_cast<size_t>(c.active_zone)];
    c.u_violation = std::max({0.0, lo - u, u - hi});
    c.q_error = std::abs(q - zone_branch(c.active_zone, u, s));
    c.ok = c.u_violation <= tol && c.q_error <= tol;
    return c;
}

VVCSettings solved_settings(const VvcVars& vars, std::span<const double> x, double s_max, const VVCSettings& limits) {
    VVCSettings s = limits;
    if (vars.q_max < 0) return s;
    s.v1 = x[static_cast<size_t>(vars.v[0])];
    s.v2 = x[static_cast<size_t>(vars.v[1])];
    s.v3 = x[static_cast<size_t>(vars.v[2])];
    s.v4 = x[static_cast<size_t>(vars.v[3])];
    s.q_max = x[static_cast<size_t>(vars.q_max)];
    return project_to_ranges(s, s_max);
}

std::string settings_to_json(const Feeder& f, const std::vector<int>& pv_units, const std::vector<VVCSettings>& s) {
    if (pv_units.size() != s.size()) throw PreconditionError("one settings entry per unit expected");
    nlohmann::ordered_json doc;
    doc["units"] = nlohmann::ordered_json::array();
    for (size_t k = 0; k < s.size(); ++k) {
        const auto& unit = f.pv_units.at(static_cast<size_t>(pv_units[k]));
        nlohmann::ordered_json u;
        u["name"] = unit.name;
        u["v1"] = std::sqrt(s[k].v1);
        u["v2"] = std::sqrt(s[k].v2);
        u["v3"] = std::sqrt(s[k].v3);
        u["v4"] = std::sqrt(s[k].v4);
        u["q_max_kvar"] = s[k].q_max * f.mva_base * 1000.0;
        u["v_l"] = std::sqrt(s[k].v_L);
        u["v_h"] = std::sqrt(s[k].v_H);
        doc["units"].push_back(u);
    }
    return doc.dump(2);
}

std::vector<VVCSettings> settings_from_json(const Feeder& f, const std::string& text, std::vector<int>* pv_units) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("settings JSON syntax error: ") + e.what());
    }
    if (!doc.contains("units") || !doc["units"].is_array()) throw InputError("settings JSON needs a 'units' array");
    std::vector<VVCSettings> out;
    if (pv_units) pv_units->clear();
    for (const auto& u : doc["units"]) {
        const std::string name = u.at("name").get<std::string>();
        int idx = -1;
        for (size_t k = 0; k < f.pv_units.size(); ++k)
            if (f.pv_units[k].name == name) idx = static_cast<int>(k);
        if (idx < 0) throw InputError("settings reference unknown PV unit '" + name + "'");
        auto sq = [&](const char* key) {
            const double v = u.at(key).get<double>();
            return v * v;
        };
        VVCSettings s;
        s.v1 = sq("v1");
        s.v2 = sq("v2");
        s.v3 = sq("v3");
        s.v4 = sq("v4");
        s.q_max = u.at("q_max_kvar").get<double>() / (f.mva_base * 1000.0);
        if (u.contains("v_l")) s.v_L = sq("v_l");
        if (u.contains("v_h")) s.v_H = sq("v_h");
        s.validate();
        out.push_back(s);
        if (pv_units) pv_units->push_back(idx);
    }
    return out;
}

}  // namespace socpf
