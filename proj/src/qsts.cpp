#include "socpf/qsts.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "socpf/common.hpp"
#include "socpf/power_flow.hpp"

namespace socpf {

std::vector<Event> default_schedule(std::uint64_t seed) {
    return {Event{20, EventKind::ActivateVvc, 0.0, 0}, Event{50, EventKind::PerturbLoads, 0.2, seed}};
}

std::string TimeSeries::to_csv(const Feeder& f) const {
    std::ostringstream out;
    out << "step,node,v_mag";
    for (int pv : units) out << ",q[" << f.pv_units[static_cast<size_t>(pv)].name << "]";
    out << '\n';
    for (size_t t = 0; t < v.size(); ++t) {
        for (int i = 0; i < f.num_nodes(); ++i) {
            out << t << ',' << f.node(i).str() << ',' << fmt::format("{:.12g}", v[t].mag[static_cast<size_t>(i)]);
            for (double qk : q[t]) out << ',' << fmt::format("{:.12g}", qk);
            out << '\n';
        }
    }
    return out.str();
}

TimeSeries simulate(const Feeder& f, const std::vector<VVCSettings>& settings, const std::vector<Event>& schedule,
                    int steps) {
    if (steps < 1) throw PreconditionError("simulation horizon must be at least one step");
    TimeSeries ts;
    for (size_t k = 0; k < f.pv_units.size(); ++k)
        if (f.pv_units[k].has_vvc) ts.units.push_back(static_cast<int>(k));
    if (settings.size() != ts.units.size()) throw PreconditionError("one VVC settings entry per VVC unit expected");
    for (const auto& s : settings) s.validate();
    for (size_t e = 0; e < schedule.size(); ++e) {
        if (schedule[e].step < 0 || schedule[e].step >= steps) throw PreconditionError("event outside the horizon");
        if (e > 0 && schedule[e].step < schedule[e - 1].step) throw PreconditionError("event steps must be nondecreasing");
        if (schedule[e].kind == EventKind::PerturbLoads && !(schedule[e].sigma >= 0))
            throw PreconditionError("perturbation sigma must be nonnegative");
    }

    std::vector<int> nodes;
    for (int pv : ts.units) nodes.push_back(f.node_index(f.pv_units[static_cast<size_t>(pv)].node));

    PowerFlowOptions pf;
    pf.tol = 1e-11;
    auto pv = default_pv_injections(f);
    VoltageState prev;
    try {
        prev = solve_power_flow(f, pv, pf).v;
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string("initial power flow failed: ") + e.what(), e.worst());
    }

    bool active = false;
    size_t next = 0;
    for (int t = 0; t < steps; ++t) {
        for (; next < schedule.size() && schedule[next].step == t; ++next) {
            const auto& ev = schedule[next];
            if (ev.kind == EventKind::ActivateVvc) {
                active = true;
            } else {
                std::mt19937_64 rng(ev.seed);
                std::normal_distribution<double> n(0.0, ev.sigma);
                pf.load_scale.assign(f.loads.size(), 1.0);
                for (auto& s : pf.load_scale) s = std::max(0.0, 1.0 + n(rng));
            }
        }
        std::vector<double> q(ts.units.size(), 0.0);
        for (size_t k = 0; k < ts.units.size(); ++k) {
            const auto& unit = f.pv_units[static_cast<size_t>(ts.units[k])];
            if (active) {
                const double m = prev.mag[static_cast<size_t>(nodes[k])];
                const double cap = std::sqrt(std::max(0.0, unit.s_max * unit.s_max - unit.p_max * unit.p_max));
                q[k] = std::clamp(qv_saturated(m * m, settings[k]), -cap, cap);
            }
            pv[static_cast<size_t>(ts.units[k])] = {unit.p_max, q[k]};
        }
        pf.initial = prev;
        try {
            prev = solve_power_flow(f, pv, pf).v;
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("power flow failed at step " + std::to_string(t) + ": " + e.what(), e.worst());
        }
        ts.v.push_back(prev);
        ts.q.push_back(std::move(q));
    }
    return ts;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "stable";
        case Verdict::Oscillatory: return "oscillatory";
        case Verdict::Diverging: return "diverging";
    }
    return "unknown";
}

Verdict stability_verdict(const TimeSeries& series, int tail, double eps) {
    const int n = series.steps();
    if (tail < 1 || tail >= n) throw PreconditionError("tail must lie in [1, series length)");
    std::vector<std::vector<double>> signals;
    const size_t nodes = series.v.front().mag.size();
    for (size_t i = 0; i < nodes; ++i) {
        std::vector<double> s;
        for (int t = n - tail - 1; t < n; ++t) s.push_back(series.v[static_cast<size_t>(t)].mag[i]);
        signals.push_back(std::move(s));
    }
    for (size_t k = 0; k < series.units.size(); ++k) {
        std::vector<double> s;
        for (int t = n - tail - 1; t < n; ++t) s.push_back(series.q[static_cast<size_t>(t)][k]);
        signals.push_back(std::move(s));
    }

    bool stable = true, alternating = true, bounded = true;
    for (const auto& s : signals) {
        std::vector<double> d;
        for (size_t t = 1; t < s.size(); ++t) d.push_back(s[t] - s[t - 1]);
        double first = 0.0, second = 0.0;
        for (size_t t = 0; t < d.size(); ++t) {
            if (std::abs(d[t]) >= eps) stable = false;
            double& half = t < d.size() / 2 ? first : second;
            half = std::max(half, std::abs(d[t]));
            if (t > 0 && std::abs(d[t]) >= eps && std::abs(d[t - 1]) >= eps && (d[t] > 0) == (d[t - 1] > 0))
                alternating = false;
        }
        if (second > first * 1.01 + eps) bounded = false;
    }
    if (stable) return Verdict::Stable;
    if (alternating && bounded) return Verdict::Oscillatory;
    return Verdict::Diverging;
}

}  // namespace socpf
