#include "doctest.h"

#include <cmath>

#include "socpf/common.hpp"
#include "socpf/qsts.hpp"
#include "test_util.hpp"

using namespace socpf;

namespace {

std::vector<VVCSettings> defaults_for(const Feeder& f) {
    std::vector<VVCSettings> out;
    for (const auto& u : f.pv_units)
        if (u.has_vvc) out.push_back(default_settings(u.s_max));
    return out;
}

TimeSeries scalar_series(const std::vector<double>& x) {
    TimeSeries ts;
    for (double v : x) {
        ts.v.push_back(VoltageState{{v}, {0.0}});
        ts.q.emplace_back();
    }
    return ts;
}

}  // namespace

TEST_CASE("without events the trajectory is constant") {
    const Feeder f = test::bundled("four_bus");
    const auto ts = simulate(f, defaults_for(f), {}, 30);
    REQUIRE(ts.steps() == 30);
    for (int t = 1; t < ts.steps(); ++t)
        for (size_t i = 0; i < ts.v[0].mag.size(); ++i) CHECK(std::abs(ts.v[static_cast<size_t>(t)].mag[i] - ts.v[0].mag[i]) < 1e-12);
    CHECK(stability_verdict(ts, 20, 1e-9) == Verdict::Stable);
}

TEST_CASE("activation absorbs reactive power and lowers an elevated voltage") {
    const Feeder f = test::bundled("two_bus_vvc");
    const auto ts = simulate(f, defaults_for(f), {Event{5, EventKind::ActivateVvc}}, 40);
    const int node = f.node_index(f.pv_units[0].node);
    CHECK(ts.q[4][0] == 0.0);
    CHECK(ts.q[5][0] < 0.0);
    CHECK(ts.v.back().mag[static_cast<size_t>(node)] < ts.v[4].mag[static_cast<size_t>(node)]);
    CHECK(stability_verdict(ts, 20, 1e-6) == Verdict::Stable);
}

TEST_CASE("a stable end state is a fixed point of the curve") {
    const Feeder f = test::bundled("feeder30");
    const auto s = defaults_for(f);
    const auto ts = simulate(f, s, default_schedule(3), 90);
    REQUIRE(stability_verdict(ts, 20, 1e-6) == Verdict::Stable);
    for (size_t k = 0; k < ts.units.size(); ++k) {
        const auto& unit = f.pv_units[static_cast<size_t>(ts.units[k])];
        const double m = ts.v.back().mag[static_cast<size_t>(f.node_index(unit.node))];
        const double cap = std::sqrt(unit.s_max * unit.s_max - unit.p_max * unit.p_max);
        CHECK(std::abs(ts.q.back()[k] - std::clamp(qv_saturated(m * m, s[k]), -cap, cap)) < 1e-6);
    }
}

TEST_CASE("perturbations are reproducible from the seed") {
    const Feeder f = test::bundled("four_bus");
    const auto s = defaults_for(f);
    const auto a = simulate(f, s, default_schedule(7), 60);
    const auto b = simulate(f, s, default_schedule(7), 60);
    const auto c = simulate(f, s, default_schedule(8), 60);
    CHECK(a.to_csv(f) == b.to_csv(f));
    CHECK(a.to_csv(f) != c.to_csv(f));
}

TEST_CASE("time series CSV has one row per step and node") {
    const Feeder f = test::bundled("four_bus");
    const auto ts = simulate(f, defaults_for(f), default_schedule(), 90);
    const std::string csv = ts.to_csv(f);
    size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 1 + 90 * static_cast<size_t>(f.num_nodes()));
    CHECK(csv.rfind("step,node,v_mag,q[pv3a],q[pv4c]\n", 0) == 0);
}

TEST_CASE("verdict classifier") {
    CHECK(stability_verdict(scalar_series(std::vector<double>(30, 1.0)), 20, 1e-6) == Verdict::Stable);
    std::vector<double> alt, grow, drift;
    for (int t = 0; t < 30; ++t) {
        alt.push_back(1.0 + (t % 2 ? 0.01 : -0.01));
        grow.push_back(1.0 + (t % 2 ? 1.0 : -1.0) * 0.001 * std::pow(1.3, t));
        drift.push_back(1.0 + 0.001 * t);
    }
    CHECK(stability_verdict(scalar_series(alt), 20, 1e-6) == Verdict::Oscillatory);
    CHECK(stability_verdict(scalar_series(grow), 20, 1e-6) == Verdict::Diverging);
    CHECK(stability_verdict(scalar_series(drift), 20, 1e-6) == Verdict::Diverging);
    std::vector<double> decay;
    for (int t = 0; t < 30; ++t) decay.push_back(1.0 + (t % 2 ? 1.0 : -1.0) * std::pow(0.2, t));
    CHECK(stability_verdict(scalar_series(decay), 20, 1e-6) == Verdict::Stable);
    CHECK_THROWS_AS(stability_verdict(scalar_series(alt), 30, 1e-6), PreconditionError);
}

TEST_CASE("zero deadband with maximum slope oscillates") {
    const Feeder f = test::bundled("feeder30");
    std::vector<VVCSettings> s;
    for (const auto& u : f.pv_units)
        if (u.has_vvc) {
            VVCSettings p;
            p.v1 = 1.08;
            p.v2 = 1.12;
            p.v3 = 1.12;
            p.v4 = 1.121;
            p.q_max = u.s_max;
            s.push_back(p);
        }
    const auto ts = simulate(f, s, default_schedule(), 90);
    CHECK(stability_verdict(ts, 20, 1e-6) == Verdict::Oscillatory);
}

TEST_CASE("simulation preconditions") {
    const Feeder f = test::bundled("four_bus");
    CHECK_THROWS_AS(simulate(f, {}, {}, 10), PreconditionError);
    CHECK_THROWS_AS(simulate(f, defaults_for(f), {}, 0), PreconditionError);
    CHECK_THROWS_AS(simulate(f, defaults_for(f), {Event{12, EventKind::ActivateVvc}}, 10), PreconditionError);
    CHECK_THROWS_AS(simulate(f, defaults_for(f), {Event{5, EventKind::ActivateVvc}, Event{2, EventKind::ActivateVvc}}, 10),
                    PreconditionError);
}
