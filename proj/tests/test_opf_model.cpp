#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "socpf/common.hpp"
#include "socpf/opf_model.hpp"
#include "socpf/power_flow.hpp"
#include "test_util.hpp"

using namespace socpf;

namespace {

VoltageState random_state(const Feeder& f, std::mt19937_64& rng) {
    VoltageState v = flat_start(f);
    std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.2, 0.2);
    for (size_t i = 0; i < v.mag.size(); ++i) {
        v.mag[i] = mag(rng);
        v.ang[i] += ang(rng);
    }
    return v;
}

// Model vector holding u, theta, c and e of a voltage state.
std::vector<double> state_vector(const OpfModel& m, const VoltageState& v) {
    std::vector<double> x(static_cast<size_t>(m.model.num_variables()), 0.0);
    const auto& L = m.layout;
    for (size_t i = 0; i < v.mag.size(); ++i) {
        x[static_cast<size_t>(L.u[i])] = v.mag[i] * v.mag[i];
        x[static_cast<size_t>(L.theta[i])] = v.ang[i];
    }
    for (size_t p = 0; p < L.paths.size(); ++p) {
        const auto i = static_cast<size_t>(L.paths[p].from), j = static_cast<size_t>(L.paths[p].to);
        const double d = v.ang[i] - v.ang[j];
        x[static_cast<size_t>(L.c[p])] = v.mag[i] * v.mag[j] * std::cos(d);
        x[static_cast<size_t>(L.e[p])] = v.mag[i] * v.mag[j] * std::sin(d);
    }
    return x;
}

}  // namespace

TEST_CASE("Taylor coefficients at unit magnitudes and a -120 degree separation") {
    const auto t = taylor_coefficients(1.0, 1.0, -2.0 * std::numbers::pi / 3.0);
    CHECK(t.c_const == doctest::Approx(std::numbers::pi / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(t.c_ui == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(t.c_uj == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(t.c_dth == doctest::Approx(0.8660254037844386).epsilon(1e-14));
    CHECK(t.e_const == doctest::Approx(-std::numbers::pi / 3.0).epsilon(1e-14));
    CHECK(t.e_ui == doctest::Approx(-0.4330127018922193).epsilon(1e-14));
    CHECK(t.e_dth == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK_THROWS_AS(taylor_coefficients(0.0, 1.0, 0.0), PreconditionError);
}

TEST_CASE("Taylor expansion is exact at the base point and second-order accurate nearby") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> du(0.85, 1.15), dd(-2.5, 2.5), dir(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double ui = du(rng), uj = du(rng), d = dd(rng);
        const auto t = taylor_coefficients(ui, uj, d);
        auto c_lin = [&](double a, double b, double x) { return t.c_const + t.c_ui * a + t.c_uj * b + t.c_dth * x; };
        auto e_lin = [&](double a, double b, double x) { return t.e_const + t.e_ui * a + t.e_uj * b + t.e_dth * x; };
        auto c_ex = [](double a, double b, double x) { return std::sqrt(a * b) * std::cos(x); };
        auto e_ex = [](double a, double b, double x) { return std::sqrt(a * b) * std::sin(x); };
        CHECK(std::abs(c_lin(ui, uj, d) - c_ex(ui, uj, d)) < 1e-13);
        CHECK(std::abs(e_lin(ui, uj, d) - e_ex(ui, uj, d)) < 1e-13);
        const double a = dir(rng), b = dir(rng), x = dir(rng);
        double prev = 0.0;
        for (double h : {1e-2, 5e-3, 2.5e-3}) {
            const double err = std::abs(c_lin(ui + h * a, uj + h * b, d + h * x) - c_ex(ui + h * a, uj + h * b, d + h * x)) +
                               std::abs(e_lin(ui + h * a, uj + h * b, d + h * x) - e_ex(ui + h * a, uj + h * b, d + h * x));
            CHECK(err < 2.0 * h * h);
            if (prev > 1e-12) CHECK(err / prev < 0.3);
            prev = err;
        }
    }
}

TEST_CASE("auxiliary paths come in reverse pairs") {
    for (const char* name : {"two_bus", "four_bus", "feeder30"}) {
        CAPTURE(name);
        const Feeder f = test::bundled(name);
        const auto m = build_base_model(f);
        const auto& L = m.layout;
        std::set<std::pair<int, int>> seen;
        for (size_t p = 0; p < L.paths.size(); ++p) {
            const auto r = static_cast<size_t>(L.reverse[p]);
            CHECK(L.paths[r].from == L.paths[p].to);
            CHECK(L.paths[r].to == L.paths[p].from);
            CHECK(static_cast<size_t>(L.reverse[r]) == p);
            CHECK(L.canonical(static_cast<int>(p)) != L.canonical(static_cast<int>(r)));
            CHECK(seen.insert({L.paths[p].from, L.paths[p].to}).second);
            CHECK(L.path_id(L.paths[p].from, L.paths[p].to) == static_cast<int>(p));
        }
    }
}

TEST_CASE("flow expressions in u, c, e reproduce the exact branch flow") {
    std::mt19937_64 rng(17);
    for (const char* name : {"two_bus", "four_bus", "feeder30"}) {
        CAPTURE(name);
        const Feeder f = test::bundled(name);
        const auto m = build_base_model(f);
        for (int trial = 0; trial < 20; ++trial) {
            const VoltageState v = random_state(f, rng);
            const auto x = state_vector(m, v);
            for (size_t l = 0; l < f.lines.size(); ++l)
                for (int dir = 0; dir < 2; ++dir)
                    for (size_t k = 0; k < f.lines[l].phases.size(); ++k) {
                        const auto [pe, qe] = flow_expressions(f, m.layout, static_cast<int>(l), dir, static_cast<int>(k));
                        const auto s = branch_flow(f, v, static_cast<int>(l), dir, f.lines[l].phases[k]);
                        CHECK(std::abs(pe.evaluate(x) - s.real()) < 1e-12);
                        CHECK(std::abs(qe.evaluate(x) - s.imag()) < 1e-12);
                    }
        }
    }
}

TEST_CASE("Taylor rows hold with equality at the base point") {
    const Feeder f = test::bundled("four_bus");
    auto m = build_base_model(f);
    std::mt19937_64 rng(2);
    const VoltageState v = random_state(f, rng);
    const BasePoint bp = base_point_from(v);
    const auto x = state_vector(m, v);
    for (size_t p = 0; p < m.layout.paths.size(); ++p) {
        for (const auto& row : taylor_bounds(m.layout, static_cast<int>(p), bp))
            CHECK(std::abs(row.expr.evaluate(x) - row.rhs) < 1e-12);
    }
    const size_t before = m.model.rows().size();
    add_taylor_bounds(m, bp);
    size_t canonical = 0;
    for (size_t p = 0; p < m.layout.paths.size(); ++p) canonical += m.layout.canonical(static_cast<int>(p));
    CHECK(m.model.rows().size() - before == 2 * canonical);
}

TEST_CASE("cone addition is idempotent and covers both orientations") {
    const Feeder f = test::bundled("four_bus");
    auto m = build_base_model(f);
    const int p = 0;
    const int r = m.layout.reverse[0];
    CHECK(add_soc_cone(m, p));
    CHECK_FALSE(add_soc_cone(m, p));
    CHECK_FALSE(add_soc_cone(m, r));
    CHECK(m.model.cones().size() == 1);
    CHECK(cone_name(m.layout, p) == cone_name(m.layout, r));
}

TEST_CASE("extracted solution of an exact state has zero errors") {
    const Feeder f = test::bundled("feeder30");
    const auto m = build_base_model(f);
    std::mt19937_64 rng(9);
    const VoltageState v = random_state(f, rng);
    const auto x = state_vector(m, v);
    const auto sol = extract_solution(f, m, x, 0.0);
    for (size_t p = 0; p < sol.paths.size(); ++p) {
        CHECK(std::abs(soc_error(sol, static_cast<int>(p))) < 1e-14);
        const auto [dc, de] = linearization_error(sol, static_cast<int>(p));
        CHECK(dc < 1e-14);
        CHECK(de < 1e-14);
    }
    const auto s = summarize_errors(sol.errors);
    CHECK(s.max_soc < 1e-14);
    for (size_t i = 0; i < v.mag.size(); ++i)
        if (!f.is_substation_node(static_cast<int>(i))) CHECK(sol.v.mag[i] == doctest::Approx(v.mag[i]).epsilon(1e-15));
    const auto csv = path_errors_csv(f, sol);
    CHECK(csv.rfind("from,to,soc_error,delta_c,delta_e\n", 0) == 0);
}

TEST_CASE("recovered voltages clamp tiny negative squared magnitudes") {
    const Feeder f = test::bundled("two_bus");
    const std::vector<double> u{1.0, -1e-10}, th{0.0, 0.1};
    const auto v = recover_voltages(f, u, th);
    CHECK(v.mag[1] == 0.0);
    CHECK(v.ang[1] == 0.1);
}
