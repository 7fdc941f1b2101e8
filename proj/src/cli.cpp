#include "socpf/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "socpf/common.hpp"
#include "socpf/metrics.hpp"
#include "socpf/orchestrator.hpp"
#include "socpf/power_flow.hpp"
#include "socpf/qsts.hpp"
#include "socpf/vvc.hpp"

namespace socpf {

using ojson = nlohmann::ordered_json;

std::string solution_to_json(const Feeder& f, const OPFSolution& sol) {
    ojson j;
    j["objective"] = sol.objective;
    ojson nodes = ojson::array();
    for (int i = 0; i < f.num_nodes(); ++i) {
        const auto s = static_cast<size_t>(i);
        ojson n{{"node", f.node(i).str()}, {"u", sol.u[s]}, {"theta", sol.theta[s]}, {"v_mag", sol.v.mag[s]},
                {"v_ang", sol.v.ang[s]}};
        if (f.is_substation_node(i)) n["injection"] = {sol.substation[s].real(), sol.substation[s].imag()};
        nodes.push_back(n);
    }
    j["nodes"] = nodes;
    ojson lines = ojson::array();
    for (size_t l = 0; l < f.lines.size(); ++l) {
        ojson ln{{"from", f.lines[l].from}, {"to", f.lines[l].to}};
        for (size_t d = 0; d < 2; ++d) {
            ojson arr = ojson::array();
            for (const auto& s : sol.flows[l].s[d]) arr.push_back({s.real(), s.imag()});
            ln[d == 0 ? "forward" : "backward"] = arr;
        }
        lines.push_back(ln);
    }
    j["lines"] = lines;
    ojson pv = ojson::array();
    for (size_t k = 0; k < sol.pv.size(); ++k)
        pv.push_back({{"name", f.pv_units[k].name}, {"p", sol.pv[k].real()}, {"q", sol.pv[k].imag()}});
    j["pv"] = pv;
    return j.dump(2);
}

OPFSolution solution_from_json(const Feeder& f, const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("solution JSON syntax error: ") + e.what());
    }
    try {
        OPFSolution sol;
        sol.objective = j.at("objective").get<double>();
        const auto& nodes = j.at("nodes");
        if (nodes.size() != static_cast<size_t>(f.num_nodes())) throw InputError("solution has the wrong node count");
        sol.substation.assign(static_cast<size_t>(f.num_nodes()), 0.0);
        for (size_t i = 0; i < nodes.size(); ++i) {
            const auto& n = nodes[i];
            if (n.at("node").get<std::string>() != f.node(static_cast<int>(i)).str())
                throw InputError("solution node order does not match the feeder");
            sol.u.push_back(n.at("u").get<double>());
            sol.theta.push_back(n.at("theta").get<double>());
            sol.v.mag.push_back(n.at("v_mag").get<double>());
            sol.v.ang.push_back(n.at("v_ang").get<double>());
            if (n.contains("injection")) sol.substation[i] = {n["injection"][0].get<double>(), n["injection"][1].get<double>()};
        }
        const auto& lines = j.at("lines");
        if (lines.size() != f.lines.size()) throw InputError("solution has the wrong line count");
        sol.flows.resize(f.lines.size());
        for (size_t l = 0; l < lines.size(); ++l)
            for (size_t d = 0; d < 2; ++d)
                for (const auto& s : lines[l].at(d == 0 ? "forward" : "backward"))
                    sol.flows[l].s[d].emplace_back(s[0].get<double>(), s[1].get<double>());
        for (const auto& p : j.at("pv")) sol.pv.emplace_back(p.at("p").get<double>(), p.at("q").get<double>());
        if (sol.pv.size() != f.pv_units.size()) throw InputError("solution has the wrong PV count");
        return sol;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed solution JSON: ") + e.what());
    }
}

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("socpf");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("SOCPF_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    if (!out) throw InputError("write failed for '" + path.string() + "'");
}

struct CommonArgs {
    std::string feeder;
    std::string out = ".";
    std::string mode = "no-vvc";
    std::string settings;
    bool relax_upper = false;
    bool warm = false;
    SolveOptions opts;
};

void add_solve_flags(CLI::App* app, CommonArgs& a, bool with_mode) {
    app->add_option("feeder", a.feeder, "feeder JSON file")->required();
    app->add_option("-o,--out", a.out, "output directory");
    if (with_mode) app->add_option("-m,--mode", a.mode, "no-vvc, default or optimal");
    app->add_option("--settings", a.settings, "VVC settings JSON for default mode");
    app->add_flag("--relax-upper", a.relax_upper, "drop upper voltage limits");
    app->add_flag("--warm-start", a.warm, "start from an oracle power flow");
    app->add_option("--eps-stage1", a.opts.eps_stage1, "base-point tolerance");
    app->add_option("--eps-cone", a.opts.eps_cone, "SOC error threshold");
    app->add_option("--eps-lin", a.opts.eps_lin, "linearization error threshold");
    app->add_option("--max-outer", a.opts.max_outer, "outer iteration cap");
    app->add_option("--max-stage1", a.opts.max_stage1, "stage-1 iteration cap");
}

SolveOptions options_for(const Feeder& f, const CommonArgs& a, Mode mode) {
    SolveOptions o = a.opts;
    o.mode = mode;
    o.relax_upper_voltage = a.relax_upper;
    o.initial = a.warm ? InitialPoint::WarmStart : InitialPoint::FlatStart;
    if (!a.settings.empty() && mode == Mode::VvcDefault) {
        std::vector<int> units;
        const auto s = settings_from_json(f, read_file(a.settings), &units);
        std::vector<VVCSettings> ordered;
        for (size_t k = 0; k < f.pv_units.size(); ++k) {
            if (!f.pv_units[k].has_vvc) continue;
            const auto it = std::find(units.begin(), units.end(), static_cast<int>(k));
            if (it == units.end()) throw InputError("settings file lacks unit '" + f.pv_units[k].name + "'");
            ordered.push_back(s[static_cast<size_t>(it - units.begin())]);
        }
        o.vvc_settings = ordered;
    }
    return o;
}

int status_exit(const SolveReport& r) {
    switch (r.status) {
        case SolveStatusCode::Converged: return exit_code::ok;
        case SolveStatusCode::Infeasible: return exit_code::infeasible;
        default: return exit_code::nonconvergence;
    }
}

std::vector<int> vvc_indices(const Feeder& f) {
    std::vector<int> out;
    for (size_t k = 0; k < f.pv_units.size(); ++k)
        if (f.pv_units[k].has_vvc) out.push_back(static_cast<int>(k));
    return out;
}

std::vector<VVCSettings> report_settings(const SolveReport& r) {
    std::vector<VVCSettings> s;
    for (const auto& u : r.units) s.push_back(u.settings);
    return s;
}

void write_solve_outputs(const Feeder& f, const SolveResult& res, const std::filesystem::path& dir,
                         const std::string& suffix) {
    write_file(dir / ("report" + suffix + ".json"), res.report.to_json());
    write_file(dir / ("trace" + suffix + ".csv"), res.report.trace_csv());
    if (!res.solution.u.empty()) {
        write_file(dir / ("errors" + suffix + ".csv"), path_errors_csv(f, res.solution));
        write_file(dir / ("solution" + suffix + ".json"), solution_to_json(f, res.solution));
    }
    if (res.report.mode == Mode::VvcOptimal && !res.report.units.empty())
        write_file(dir / ("settings" + suffix + ".json"), settings_to_json(f, vvc_indices(f), report_settings(res.report)));
}

void print_summary(const SolveReport& r) {
    std::cout << to_string(r.mode) << ": " << to_string(r.status) << ", objective " << r.objective
              << ", max soc error " << r.errors.max_soc << ", cones " << r.cones << ", stage-1 iterations "
              << r.stage1.size() << '\n';
    if (!r.certificate.empty()) {
        std::cout << "infeasibility certificate: " << r.certificate.size() << " rows (listed in the report); limits:";
        for (const auto& c : r.certificate)
            if (c.starts_with("lb:") || c.starts_with("ub:")) std::cout << ' ' << c;
        std::cout << '\n';
    }
}

int cmd_solve(const CommonArgs& a) {
    const Feeder f = load_feeder(a.feeder);
    std::filesystem::create_directories(a.out);
    const SolveResult res = two_stage_solve(f, options_for(f, a, parse_mode(a.mode)));
    write_solve_outputs(f, res, a.out, "");
    print_summary(res.report);
    return status_exit(res.report);
}

int cmd_compare(const CommonArgs& a, const std::string& modes) {
    const Feeder f = load_feeder(a.feeder);
    std::filesystem::create_directories(a.out);
    std::vector<Mode> list;
    std::stringstream ss(modes);
    for (std::string m; std::getline(ss, m, ',');) list.push_back(parse_mode(m));
    if (list.size() != 2) throw InputError("compare expects exactly two modes, e.g. default,optimal");
    std::vector<SolveResult> res;
    for (Mode m : list) {
        res.push_back(two_stage_solve(f, options_for(f, a, m)));
        write_solve_outputs(f, res.back(), a.out, "_" + to_string(m));
        print_summary(res.back().report);
    }
    for (const auto& r : res)
        if (!r.report.converged()) return status_exit(r.report);
    const auto& base = res[0].report;
    const auto& alt = res[1].report;
    ojson j;
    j["modes"] = {to_string(list[0]), to_string(list[1])};
    j["objective"] = {base.objective, alt.objective};
    j["cost_saving_percent"] = base.objective > 0 ? ojson(cost_saving(base.objective, alt.objective)) : ojson(nullptr);
    j["curtailment_percent"] = {base.curtailment, alt.curtailment};
    j["p_available_kw"] = base.p_available_kw;
    j["p_dispatched_kw"] = {base.p_dispatched_kw, alt.p_dispatched_kw};
    j["max_soc_error"] = {base.errors.max_soc, alt.errors.max_soc};
    write_file(std::filesystem::path(a.out) / "compare.json", j.dump(2));
    if (base.objective > 0)
        std::cout << "cost saving " << cost_saving(base.objective, alt.objective) << " %, curtailment "
                  << base.curtailment << " % -> " << alt.curtailment << " %\n";
    return exit_code::ok;
}

struct SimArgs {
    std::string feeder;
    std::string out = ".";
    std::string settings;
    bool from_optimal = false;
    int steps = 90;
    int tail = 20;
    double eps = 1e-6;
    std::uint64_t seed = 1;
    double sigma = 0.2;
};

int cmd_simulate(const SimArgs& a) {
    const Feeder f = load_feeder(a.feeder);
    std::filesystem::create_directories(a.out);
    const auto units = vvc_indices(f);
    std::vector<VVCSettings> settings;
    if (a.from_optimal) {
        SolveOptions o;
        o.mode = Mode::VvcOptimal;
        const auto res = two_stage_solve(f, o);
        if (!res.report.converged()) {
            print_summary(res.report);
            return status_exit(res.report);
        }
        settings = report_settings(res.report);
    } else if (!a.settings.empty()) {
        CommonArgs c;
        c.settings = a.settings;
        settings = options_for(f, c, Mode::VvcDefault).vvc_settings;
    } else {
        for (int pv : units) settings.push_back(default_settings(f.pv_units[static_cast<size_t>(pv)].s_max));
    }
    auto schedule = default_schedule(a.seed);
    schedule[1].sigma = a.sigma;
    const TimeSeries ts = simulate(f, settings, schedule, a.steps);
    const Verdict v = stability_verdict(ts, a.tail, a.eps);
    write_file(std::filesystem::path(a.out) / "timeseries.csv", ts.to_csv(f));
    ojson j{{"steps", a.steps}, {"tail", a.tail}, {"eps", a.eps}, {"seed", a.seed}, {"verdict", to_string(v)}};
    write_file(std::filesystem::path(a.out) / "simulation.json", j.dump(2));
    std::cout << "verdict: " << to_string(v) << '\n';
    return exit_code::ok;
}

int cmd_verify(const std::string& feeder, const std::string& solution, double tol) {
    const Feeder f = load_feeder(feeder);
    const OPFSolution sol = solution_from_json(f, read_file(solution));
    const VerificationReport rep = verify_opf_solution(f, sol, tol);
    std::cout << rep.to_json() << '\n';
    return rep.pass ? exit_code::ok : exit_code::verification_failed;
}

int cmd_dump(const CommonArgs& a, const std::string& file) {
    const Feeder f = load_feeder(a.feeder);
    const SolveOptions o = options_for(f, a, parse_mode(a.mode));
    const StageModel sm = build_stage_model(f, o, initial_base_point(f, o), {});
    if (file.empty() || file == "-") {
        write_model(std::cout, sm.opf.model);
    } else {
        std::ofstream out(file);
        if (!out) throw InputError("cannot write '" + file + "'");
        write_model(out, sm.opf.model);
    }
    return exit_code::ok;
}

}  // namespace

int run(int argc, const char* const* argv) {
    if (!spdlog::get("socpf")) setup_logging();
    CLI::App app{"Three-phase SOCP optimal power flow with Volt-VAR control"};
    app.require_subcommand(1);

    CommonArgs solve_args;
    auto* solve = app.add_subcommand("solve", "run the two-stage solve");
    add_solve_flags(solve, solve_args, true);

    CommonArgs cmp_args;
    std::string modes = "default,optimal";
    auto* compare = app.add_subcommand("compare", "solve two modes and report cost saving and curtailment");
    add_solve_flags(compare, cmp_args, false);
    compare->add_option("--modes", modes, "two comma-separated modes");

    SimArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "quasi-static VVC dynamics");
    simulate_cmd->add_option("feeder", sim.feeder, "feeder JSON file")->required();
    simulate_cmd->add_option("-o,--out", sim.out, "output directory");
    simulate_cmd->add_option("--settings", sim.settings, "VVC settings JSON");
    simulate_cmd->add_flag("--optimal", sim.from_optimal, "use co-optimized settings");
    simulate_cmd->add_option("--steps", sim.steps, "horizon");
    simulate_cmd->add_option("--tail", sim.tail, "steps checked for the verdict");
    simulate_cmd->add_option("--eps", sim.eps, "verdict tolerance");
    simulate_cmd->add_option("--seed", sim.seed, "perturbation seed");
    simulate_cmd->add_option("--sigma", sim.sigma, "relative load standard deviation");

    std::string vf, vs;
    double vtol = 1e-5;
    auto* verify = app.add_subcommand("verify", "check a solution against the nonlinear power flow");
    verify->add_option("feeder", vf, "feeder JSON file")->required();
    verify->add_option("solution", vs, "solution JSON file")->required();
    verify->add_option("--tol", vtol, "tolerance");

    CommonArgs dump_args;
    std::string dump_file;
    auto* dump = app.add_subcommand("dump-model", "write the first stage-1 model");
    add_solve_flags(dump, dump_args, true);
    dump->add_option("-f,--file", dump_file, "output file, '-' for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_code::ok : exit_code::input_error;
    }

    try {
        if (*solve) return cmd_solve(solve_args);
        if (*compare) return cmd_compare(cmp_args, modes);
        if (*simulate_cmd) return cmd_simulate(sim);
        if (*verify) return cmd_verify(vf, vs, vtol);
        if (*dump) return cmd_dump(dump_args, dump_file);
    } catch (const InputError& e) {
        spdlog::error("{}", e.what());
        return exit_code::input_error;
    } catch (const PreconditionError& e) {
        spdlog::error("{}", e.what());
        return exit_code::input_error;
    } catch (const ConvergenceError& e) {
        spdlog::error("{}", e.what());
        return exit_code::nonconvergence;
    } catch (const std::filesystem::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return exit_code::input_error;
    }
    return exit_code::input_error;
}

}  // namespace socpf
