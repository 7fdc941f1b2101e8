#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "socpf/feeder.hpp"
#include "socpf/vvc.hpp"

namespace socpf {

enum class EventKind { ActivateVvc, PerturbLoads };

struct Event {
    int step = 0;
    EventKind kind = EventKind::ActivateVvc;
    /// Relative standard deviation of the multiplicative load factor.
    double sigma = 0.2;
    std::uint64_t seed = 0;
};

/// Activation at step 20 and a 20% load perturbation at step 50.
std::vector<Event> default_schedule(std::uint64_t seed = 1);

struct TimeSeries {
    /// PV indices of the VVC units, in feeder order.
    std::vector<int> units;
    std::vector<VoltageState> v;
    /// [step][unit] reactive output in p.u.
    std::vector<std::vector<double>> q;

    int steps() const { return static_cast<int>(v.size()); }
    /// Columns: step,node,v_mag, then one q column per VVC unit; one row per step and node.
    std::string to_csv(const Feeder& f) const;
};

/// Quasi-static iteration: at each step every active VVC sets Q from its
/// previous-step squared voltage (saturating outside the continuous range and
/// clamped to the inverter capability), then the power flow is re-solved.
/// `settings` holds one entry per VVC unit in feeder order. Throws
/// ConvergenceError naming the step when the power flow fails.
TimeSeries simulate(const Feeder& f, const std::vector<VVCSettings>& settings, const std::vector<Event>& schedule,
                    int steps = 90);

enum class Verdict { Stable, Oscillatory, Diverging };
std::string to_string(Verdict v);

/// Classifies the last `tail` step-to-step changes of every voltage magnitude
/// and VVC output.
Verdict stability_verdict(const TimeSeries& series, int tail, double eps);

}  // namespace socpf
