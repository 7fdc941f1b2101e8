#include "doctest.h"

#include <cmath>

#include "json.hpp"

#include "socpf/common.hpp"
#include "socpf/orchestrator.hpp"
#include "test_util.hpp"

using namespace socpf;

TEST_CASE("stage-1 convergence test is strict and per component") {
    VoltageState a{{1.0, 1.0}, {0.0, -2.0}};
    VoltageState b = a;
    CHECK(stage1_converged(a, b, 1e-6));
    b.mag[1] += 0.5e-6;
    CHECK(stage1_converged(a, b, 1e-6));
    b.mag[1] = a.mag[1] + 2e-6;
    CHECK_FALSE(stage1_converged(a, b, 1e-6));
    b = a;
    b.ang[0] = 1e-6;
    CHECK_FALSE(stage1_converged(a, b, 1e-6));
    b = a;
    b.ang[0] = 2e-6;
    CHECK_FALSE(stage1_converged(a, b, 1e-6));
    VoltageState c{{1.0}, {0.0}};
    CHECK_THROWS_AS(stage1_converged(a, c, 1e-6), PreconditionError);
}

TEST_CASE("base point update takes the solved voltages and keeps settings when none were solved") {
    OPFSolution sol;
    sol.u = {1.0, 0.98};
    sol.theta = {0.0, -0.01};
    BasePoint prev;
    prev.u0 = {1.0, 1.0};
    prev.theta0 = {0.0, 0.0};
    prev.vvc = {VvcBase{{0.9, 0.96, 1.04, 1.1}, 0.5}};
    auto bp = update_base_points(sol, prev);
    CHECK(bp.u0 == sol.u);
    CHECK(bp.theta0 == sol.theta);
    CHECK(bp.vvc == prev.vvc);
    sol.vvc_settings = {VvcBase{{0.88, 0.95, 1.02, 1.12}, 0.4}};
    CHECK(update_base_points(sol, prev).vvc == sol.vvc_settings);
}

TEST_CASE("option validation") {
    SolveOptions o;
    CHECK_NOTHROW(o.validate());
    o.eps_stage1 = 0.0;
    CHECK_THROWS_AS(o.validate(), PreconditionError);
    o = {};
    o.max_outer = 0;
    CHECK_THROWS_AS(o.validate(), PreconditionError);
    CHECK(parse_mode("no-vvc") == Mode::NoVvc);
    CHECK(parse_mode("default") == Mode::VvcDefault);
    CHECK(parse_mode("optimal") == Mode::VvcOptimal);
    CHECK_THROWS_AS(parse_mode("bogus"), InputError);
}

TEST_CASE("unloaded feeder converges in one iteration with zero cost") {
    Feeder f = test::bundled("two_bus");
    f.loads.clear();
    f.pv_units.clear();
    f.finalize();
    const auto r = two_stage_solve(f, {});
    REQUIRE(r.report.converged());
    CHECK(r.report.stage1.size() == 1);
    CHECK(std::abs(r.report.objective) < 1e-7);
    CHECK(r.solution.v.mag[1] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("no-VVC solves are exact and verified") {
    for (const char* name : {"two_bus", "four_bus"}) {
        CAPTURE(name);
        const Feeder f = test::bundled(name);
        const auto r = two_stage_solve(f, {});
        REQUIRE(r.report.converged());
        CHECK(r.report.errors.max_soc <= 1e-6);
        CHECK(r.report.errors.max_delta_c <= 1e-6);
        CHECK(r.report.errors.max_delta_e <= 1e-6);
        CHECK(r.report.verification.pass);
        CHECK(r.report.verification.max_flow_mismatch <= 1e-4);
        CHECK(r.report.verification.max_balance_residual <= 1e-4);
    }
}

TEST_CASE("flat and warm starts reach the same operating point") {
    const Feeder f = test::bundled("four_bus");
    SolveOptions o;
    const auto flat = two_stage_solve(f, o);
    o.initial = InitialPoint::WarmStart;
    const auto warm = two_stage_solve(f, o);
    REQUIRE(flat.report.converged());
    REQUIRE(warm.report.converged());
    CHECK(warm.report.objective == doctest::Approx(flat.report.objective).epsilon(1e-6));
    for (size_t i = 0; i < flat.solution.v.mag.size(); ++i)
        CHECK(std::abs(warm.solution.v.mag[i] - flat.solution.v.mag[i]) < 1e-5);
}

TEST_CASE("repeated solves give identical reports") {
    const Feeder f = test::bundled("four_bus");
    SolveOptions o;
    o.mode = Mode::VvcDefault;
    const auto a = two_stage_solve(f, o);
    const auto b = two_stage_solve(f, o);
    CHECK(a.report.to_json() == b.report.to_json());
    CHECK(a.report.trace_csv() == b.report.trace_csv());
}

TEST_CASE("overvoltage feeder without VVC is infeasible and the certificate names voltage limits") {
    const Feeder f = test::bundled("feeder30");
    const auto r = two_stage_solve(f, {});
    CHECK(r.report.status == SolveStatusCode::Infeasible);
    REQUIRE_FALSE(r.report.certificate.empty());
    std::vector<std::string> limits;
    for (const auto& c : r.report.certificate)
        if (c.starts_with("lb:") || c.starts_with("ub:")) limits.push_back(c);
    // the upper voltage limits at the three VVC buses
    CHECK(limits == std::vector<std::string>{"ub:u[b6.A]", "ub:u[b8.B]", "ub:u[b9.C]"});
    SolveOptions relaxed;
    relaxed.relax_upper_voltage = true;
    const auto ok = two_stage_solve(f, relaxed);
    CHECK(ok.report.converged());
    double vmax = 0.0;
    for (double m : ok.solution.v.mag) vmax = std::max(vmax, m);
    CHECK(vmax > 1.05);
}

TEST_CASE("co-optimized settings never cost more than defaults on the 4-bus feeder") {
    const Feeder f = test::bundled("four_bus");
    SolveOptions o;
    o.mode = Mode::VvcDefault;
    const auto def = two_stage_solve(f, o);
    o.mode = Mode::VvcOptimal;
    const auto opt = two_stage_solve(f, o);
    REQUIRE(def.report.converged());
    REQUIRE(opt.report.converged());
    CHECK(opt.report.objective <= def.report.objective + 1e-6);
    for (const auto& u : def.report.units) {
        CHECK(u.zone.ok);
        CHECK(u.zone.zeros == 1);
    }
    for (const auto& u : opt.report.units) {
        CHECK(u.zone.ok);
        CHECK(settings_in_range(u.settings, f.pv_units[static_cast<size_t>(u.pv)].s_max));
        CHECK(u.f_error <= 1e-6);
    }
    CHECK(def.report.zones_consistent);
    CHECK(opt.report.zones_consistent);
}

TEST_CASE("report JSON and trace CSV carry the iteration history") {
    const Feeder f = test::bundled("two_bus_vvc");
    SolveOptions o;
    o.mode = Mode::VvcDefault;
    const auto r = two_stage_solve(f, o);
    REQUIRE(r.report.converged());
    const auto j = nlohmann::json::parse(r.report.to_json());
    CHECK(j.contains("status"));
    CHECK(j.contains("objective"));
    const std::string csv = r.report.trace_csv();
    CHECK(csv.rfind("stage,outer,iteration,max_dmag,max_dang,max_dsetting,objective,bnb_nodes,max_soc_error,cones_added\n", 0) == 0);
    size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 1 + r.report.stage1.size() + r.report.stage2.size());
}
