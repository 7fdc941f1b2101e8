#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "socpf/conic_model.hpp"
#include "socpf/feeder.hpp"
#include "socpf/opf_model.hpp"

namespace socpf {

/// Q-V curve of one inverter. Voltages are squared magnitudes (p.u.^2).
struct VVCSettings {
    double v1 = 0.94 * 0.94;
    double v2 = 0.98 * 0.98;
    double v3 = 1.02 * 1.02;
    double v4 = 1.06 * 1.06;
    double q_max = 0.0;
    double v_L = 0.88 * 0.88;
    double v_H = 1.10 * 1.10;

    /// Throws PreconditionError unless v_L < v1 < v2 <= v3 < v4 < v_H and q_max >= 0.
    void validate() const;
    bool operator==(const VVCSettings&) const = default;
};

VVCSettings default_settings(double s_max);

/// Allowable ranges for co-optimized settings.
struct SettingRanges {
    static constexpr double v1_min = 0.82 * 0.82;
    static constexpr double v2_min = 0.97 * 0.97;
    static constexpr double v2_max = 1.0;
    static constexpr double v3_min = 1.0;
    static constexpr double v3_max = 1.03 * 1.03;
    static constexpr double v4_max = 1.18 * 1.18;
    static constexpr double min_gap = 0.04;
};

/// True when the settings satisfy the allowable ranges for a unit rated s_max.
bool settings_in_range(const VVCSettings& s, double s_max);
/// Clamps settings onto the allowable ranges.
VVCSettings project_to_ranges(VVCSettings s, double s_max);

/// Zone 1..5 of u; intervals are half-open [lower, upper).
int zone_of(double u, const VVCSettings& s);
/// Piecewise-linear reactive output; throws outside [v_L, v_H).
double qv_reactive(double u, const VVCSettings& s);
/// Reactive output of zone `zone`'s branch extended to any u.
double zone_branch(int zone, double u, const VVCSettings& s);
/// Like qv_reactive but saturating at +-q_max outside the continuous range.
double qv_saturated(double u, const VVCSettings& s);

struct BigM {
    double m_v = 0.0;
    double m_q = 0.0;
};

/// Covers every zone row for u in [v_L, v_H] and |Q| <= s_max, with zone
/// branches extended linearly over that range.
BigM default_big_m(const VVCSettings& s, double s_max);
/// Big-M large enough for every setting inside the allowable ranges.
BigM optimal_big_m(const VVCSettings& s, double s_max);

struct VvcVars {
    int pv = -1;
    int node = -1;
    std::array<VarId, 5> z{-1, -1, -1, -1, -1};
    /// Setting variables (optimal mode only).
    std::array<VarId, 4> v{-1, -1, -1, -1};
    VarId q_max = -1;
    int zone_rows = 0;
};

/// P^2 + Q^2 <= s_max^2 and 0 <= P <= p_max for PV `pv`.
void add_capability(OpfModel& m, const Feeder& f, int pv);

/// Fixed-settings zone implications, cardinality row, binaries and capability.
VvcVars add_default_vvc(OpfModel& m, const Feeder& f, int pv, const VVCSettings& s, const BigM& big_m);

/// Co-optimized settings with linearized zone-2 and zone-4 rows around `bp`.
/// Those two rows widen big_m.m_q to bound the linearization over the variable boxes.
VvcVars add_optimal_vvc(OpfModel& m, const Feeder& f, int pv, const VvcBase& bp, double u0, const VVCSettings& limits,
                        const BigM& big_m);

/// First-order expansion of Q (v2 - u)/(v2 - v1) (which = 2, breakpoints v1, v2)
/// or Q (u - v3)/(v3 - v4) (which = 4, breakpoints v3, v4). Both are degree-one
/// homogeneous, so the expansion has no constant term.
struct FLinear {
    double q = 0.0;
    double u = 0.0;
    double va = 0.0;
    double vb = 0.0;
    double evaluate(double q_, double u_, double va_, double vb_) const { return q * q_ + u * u_ + va * va_ + vb * vb_; }
};

FLinear linearize_f(const VvcBase& bp, double u0, int which);
/// Exact nonlinear zone term.
double f_exact(int which, double q, double u, double va, double vb);

struct ZoneCheck {
    bool ok = false;
    int active_zone = 0;
    int zeros = 0;
    double q_error = 0.0;
    double u_violation = 0.0;
};

/// Accepted-solution check: exactly one zero indicator, u inside that zone's
/// closed interval and Q on that zone's branch, each within tol.
ZoneCheck check_zone(double u, double q, const std::array<double, 5>& z, const VVCSettings& s, double tol);

/// Settings from a solved optimal-mode model, projected onto the allowable ranges.
VVCSettings solved_settings(const VvcVars& vars, std::span<const double> x, double s_max, const VVCSettings& limits);

/// Export format: v1..v4 as voltage magnitudes (p.u.) and q_max in kvar.
std::string settings_to_json(const Feeder& f, const std::vector<int>& pv_units, const std::vector<VVCSettings>& s);
std::vector<VVCSettings> settings_from_json(const Feeder& f, const std::string& text, std::vector<int>* pv_units = nullptr);

}  // namespace socpf
