#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "socpf/common.hpp"
#include "socpf/kernels.hpp"
#include "socpf/power_flow.hpp"
#include "test_util.hpp"

using namespace socpf;
using cd = std::complex<double>;

namespace {

// Backward/forward sweep on a radial feeder whose lines point away from the substation.
std::vector<cd> sweep(const Feeder& f, const std::vector<cd>& pv, int iters = 500) {
    const int n = f.num_nodes();
    std::vector<cd> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = std::polar(f.substation.v_pu, f.substation.angle_a + nominal_angle(f.node(i).phase));
    std::vector<cd> s_net = f.node_demand();
    const auto inj = pv_node_injection(f, pv);
    for (int i = 0; i < n; ++i) s_net[static_cast<size_t>(i)] -= inj[static_cast<size_t>(i)];

    std::vector<Eigen::MatrixXcd> z;
    for (const auto& l : f.lines) {
        Eigen::MatrixXcd y(l.g.rows(), l.g.cols());
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) = cd(l.g(i, j), l.b(i, j));
        z.push_back(y.inverse());
    }
    // order lines so that every parent precedes its children
    std::vector<int> order;
    std::vector<int> reached(f.buses.size(), 0);
    reached[static_cast<size_t>(f.bus_index(f.substation.bus))] = 1;
    while (order.size() < f.lines.size())
        for (size_t k = 0; k < f.lines.size(); ++k) {
            const int a = f.bus_index(f.lines[k].from), b = f.bus_index(f.lines[k].to);
            if (reached[static_cast<size_t>(a)] && !reached[static_cast<size_t>(b)]) {
                reached[static_cast<size_t>(b)] = 1;
                order.push_back(static_cast<int>(k));
            }
        }

    for (int it = 0; it < iters; ++it) {
        std::vector<cd> i_node(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) i_node[static_cast<size_t>(i)] = std::conj(s_net[static_cast<size_t>(i)] / v[static_cast<size_t>(i)]);
        std::vector<cd> acc = i_node;
        for (auto k = order.rbegin(); k != order.rend(); ++k) {
            const auto& l = f.lines[static_cast<size_t>(*k)];
            for (Phase p : l.phases) acc[static_cast<size_t>(f.node_index(l.from, p))] += acc[static_cast<size_t>(f.node_index(l.to, p))];
        }
        double change = 0.0;
        for (int k : order) {
            const auto& l = f.lines[static_cast<size_t>(k)];
            const auto m = static_cast<Eigen::Index>(l.phases.size());
            Eigen::VectorXcd cur(m);
            for (Eigen::Index a = 0; a < m; ++a) cur(a) = acc[static_cast<size_t>(f.node_index(l.to, l.phases[static_cast<size_t>(a)]))];
            const Eigen::VectorXcd drop = z[static_cast<size_t>(k)] * cur;
            for (Eigen::Index a = 0; a < m; ++a) {
                const Phase p = l.phases[static_cast<size_t>(a)];
                const cd nv = v[static_cast<size_t>(f.node_index(l.from, p))] - drop(a);
                cd& old = v[static_cast<size_t>(f.node_index(l.to, p))];
                change = std::max(change, std::abs(nv - old));
                old = nv;
            }
        }
        if (change < 1e-14) break;
    }
    return v;
}

}  // namespace

TEST_CASE("two-bus power flow matches the closed-form receiving-end voltage") {
    const Feeder f = test::bundled("two_bus");
    const auto res = solve_power_flow(f, default_pv_injections(f), {.tol = 1e-12});
    const cd z = 1.0 / cd(f.lines[0].g(0, 0), f.lines[0].b(0, 0));
    const cd s = cd(f.loads[0].p - f.pv_units[0].p_max, f.loads[0].q);
    const double v1 = f.substation.v_pu;
    const double a = v1 * v1 - 2.0 * (z.real() * s.real() + z.imag() * s.imag());
    const double u2 = 0.5 * (a + std::sqrt(a * a - 4.0 * std::norm(z) * std::norm(s)));
    const double m2 = std::sqrt(u2);
    const double th2 = -std::arg(m2 + z * std::conj(s) / m2);
    CHECK(res.v.mag[1] == doctest::Approx(m2).epsilon(1e-11));
    CHECK(res.v.ang[1] == doctest::Approx(th2).epsilon(1e-10));
    CHECK(res.max_mismatch <= 1e-12);
}

TEST_CASE("three-phase Newton solution matches a backward/forward sweep") {
    for (const char* name : {"four_bus", "feeder30"}) {
        CAPTURE(name);
        const Feeder f = test::bundled(name);
        const auto pv = default_pv_injections(f);
        const auto res = solve_power_flow(f, pv, {.tol = 1e-12});
        const auto ref = sweep(f, pv);
        for (int i = 0; i < f.num_nodes(); ++i) {
            CAPTURE(i);
            CHECK(std::abs(res.v.phasor(i) - ref[static_cast<size_t>(i)]) < 1e-9);
        }
        const auto mis = kernels::nodal_mismatch(f, res.v, pv_node_injection(f, pv), f.node_demand());
        for (int i = 0; i < f.num_nodes(); ++i)
            if (!f.is_substation_node(i)) CHECK(std::abs(mis[static_cast<size_t>(i)]) < 1e-11);
    }
}

TEST_CASE("power flow starting from a previous solution converges immediately") {
    const Feeder f = test::bundled("four_bus");
    const auto pv = default_pv_injections(f);
    const auto first = solve_power_flow(f, pv, {.tol = 1e-12});
    PowerFlowOptions opts{.tol = 1e-10};
    opts.initial = first.v;
    const auto again = solve_power_flow(f, pv, opts);
    CHECK(again.iterations <= 1);
}

TEST_CASE("branch flow from both ends accounts for the series loss") {
    const Feeder f = test::bundled("two_bus");
    const auto res = solve_power_flow(f, default_pv_injections(f), {.tol = 1e-12});
    const cd sf = branch_flow(f, res.v, 0, 0, Phase::A);
    const cd sb = branch_flow(f, res.v, 0, 1, Phase::A);
    const cd z = 1.0 / cd(f.lines[0].g(0, 0), f.lines[0].b(0, 0));
    const cd i = (res.v.phasor(0) - res.v.phasor(1)) / z;
    CHECK(std::abs(sf + sb - z * std::norm(i)) < 1e-12);
}

TEST_CASE("heavy overload raises ConvergenceError with the worst mismatch") {
    const Feeder base = test::bundled("two_bus");
    Feeder f = base;
    f.loads[0].p = 50.0;
    f.finalize();
    try {
        solve_power_flow(f, default_pv_injections(f), {.max_iter = 30});
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.worst() > 1e-8);
    }
}

TEST_CASE("load scaling with unit factors is a no-op") {
    const Feeder f = test::bundled("feeder30");
    const auto pv = default_pv_injections(f);
    PowerFlowOptions opts{.tol = 1e-12};
    const auto a = solve_power_flow(f, pv, opts);
    opts.load_scale.assign(f.loads.size(), 1.0);
    const auto b = solve_power_flow(f, pv, opts);
    CHECK(a.v == b.v);
    CHECK_THROWS_AS(scaled_demand(f, std::vector<double>(f.loads.size() + 1, 1.0)), PreconditionError);
}
