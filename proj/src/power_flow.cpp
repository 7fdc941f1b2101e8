#include "socpf/power_flow.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "socpf/common.hpp"
#include "socpf/opf_model.hpp"

namespace socpf {

std::complex<double> branch_flow(const Feeder& f, const VoltageState& v, int line_index, int direction, Phase phase) {
    const auto& line = f.lines.at(static_cast<size_t>(line_index));
    const int k = line.index_of(phase);
    if (k < 0) throw PreconditionError("phase not present on line " + line.from + "-" + line.to);
    std::vector<std::complex<double>> ph(v.mag.size());
    for (size_t i = 0; i < ph.size(); ++i) ph[i] = std::polar(v.mag[i], v.ang[i]);
    return kernels::line_phase_flow(f, line, direction, k, ph);
}

std::vector<std::complex<double>> default_pv_injections(const Feeder& f) {
    std::vector<std::complex<double>> out;
    for (const auto& pv : f.pv_units) out.emplace_back(pv.p_max, 0.0);
    return out;
}

std::vector<std::complex<double>> pv_node_injection(const Feeder& f, const std::vector<std::complex<double>>& pv) {
    if (pv.size() != f.pv_units.size()) throw PreconditionError("one PV setpoint per PV unit expected");
    std::vector<std::complex<double>> inj(static_cast<size_t>(f.num_nodes()));
    for (size_t k = 0; k < pv.size(); ++k) inj[static_cast<size_t>(f.node_index(f.pv_units[k].node))] += pv[k];
    return inj;
}

std::vector<std::complex<double>> scaled_demand(const Feeder& f, const std::vector<double>& load_scale) {
    if (!load_scale.empty() && load_scale.size() != f.loads.size())
        throw PreconditionError("one load scale factor per load expected");
    std::vector<std::complex<double>> d(static_cast<size_t>(f.num_nodes()));
    for (size_t k = 0; k < f.loads.size(); ++k) {
        const double s = load_scale.empty() ? 1.0 : load_scale[k];
        d[static_cast<size_t>(f.node_index(f.loads[k].node))] += s * std::complex<double>(f.loads[k].p, f.loads[k].q);
    }
    return d;
}

namespace {

Eigen::MatrixXcd build_ybus(const Feeder& f) {
    const int n = f.num_nodes();
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& line : f.lines) {
        for (size_t a = 0; a < line.phases.size(); ++a)
            for (size_t b = 0; b < line.phases.size(); ++b) {
                const std::complex<double> y(line.g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)),
                                             line.b(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
                const int ia = f.node_index(line.from, line.phases[a]), ib = f.node_index(line.from, line.phases[b]);
                const int ja = f.node_index(line.to, line.phases[a]), jb = f.node_index(line.to, line.phases[b]);
                Y(ia, ib) += y;
                Y(ja, jb) += y;
                Y(ia, jb) -= y;
                Y(ja, ib) -= y;
            }
    }
    return Y;
}

}  // namespace

PowerFlowResult solve_power_flow(const Feeder& f, const std::vector<std::complex<double>>& pv_injections,
                                 const PowerFlowOptions& opts) {
    const int n = f.num_nodes();
    const auto inj = pv_node_injection(f, pv_injections);
    const auto dem = scaled_demand(f, opts.load_scale);
    Eigen::VectorXcd spec(n);
    for (int i = 0; i < n; ++i) spec[i] = inj[static_cast<size_t>(i)] - dem[static_cast<size_t>(i)];

    PowerFlowResult res;
    res.v = opts.initial ? *opts.initial : flat_start(f);
    if (static_cast<int>(res.v.mag.size()) != n || static_cast<int>(res.v.ang.size()) != n)
        throw PreconditionError("initial voltage state has the wrong size");
    for (int i : f.substation_nodes()) {
        const auto vs = f.substation_voltage(i);
        res.v.mag[static_cast<size_t>(i)] = std::abs(vs);
        res.v.ang[static_cast<size_t>(i)] = std::arg(vs);
    }

    std::vector<int> pq;
    for (int i = 0; i < n; ++i)
        if (!f.is_substation_node(i)) pq.push_back(i);
    const int m = static_cast<int>(pq.size());
    if (m == 0) return res;

    const Eigen::MatrixXcd Y = build_ybus(f);
    const std::complex<double> J(0.0, 1.0);
    Eigen::VectorXcd V(n);

    for (int it = 0;; ++it) {
        for (int i = 0; i < n; ++i) V[i] = std::polar(res.v.mag[static_cast<size_t>(i)], res.v.ang[static_cast<size_t>(i)]);
        const Eigen::VectorXcd I = Y * V;
        const Eigen::VectorXcd S = V.cwiseProduct(I.conjugate());
        Eigen::VectorXd F(2 * m);
        double worst = 0.0;
        for (int r = 0; r < m; ++r) {
            const auto d = S[pq[static_cast<size_t>(r)]] - spec[pq[static_cast<size_t>(r)]];
            F[r] = d.real();
            F[m + r] = d.imag();
            worst = std::max({worst, std::abs(d.real()), std::abs(d.imag())});
        }
        res.iterations = it;
        res.max_mismatch = worst;
        if (!std::isfinite(worst)) throw ConvergenceError("power flow diverged", worst);
        if (worst <= opts.tol) break;
        if (it >= opts.max_iter)
            throw ConvergenceError("power flow did not converge in " + std::to_string(opts.max_iter) +
                                       " iterations (worst mismatch " + std::to_string(worst) + ")",
                                   worst);

        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        Eigen::MatrixXd Jac(2 * m, 2 * m);
        for (int r = 0; r < m; ++r) {
            const int i = pq[static_cast<size_t>(r)];
            for (int c = 0; c < m; ++c) {
                const int k = pq[static_cast<size_t>(c)];
                const std::complex<double> en = V[k] / std::abs(V[k]);
                std::complex<double> dva = -J * V[i] * std::conj(Y(i, k) * V[k]);
                std::complex<double> dvm = V[i] * std::conj(Y(i, k) * en);
                if (i == k) {
                    dva += J * V[i] * std::conj(I[i]);
                    dvm += std::conj(I[i]) * en;
                }
                Jac(r, c) = dva.real();
                Jac(m + r, c) = dva.imag();
                Jac(r, m + c) = dvm.real();
                Jac(m + r, m + c) = dvm.imag();
            }
        }
        const Eigen::VectorXd dx = Jac.partialPivLu().solve(-F);
        for (int r = 0; r < m; ++r) {
            const auto i = static_cast<size_t>(pq[static_cast<size_t>(r)]);
            res.v.ang[i] += dx[r];
            res.v.mag[i] += dx[m + r];
        }
    }
    spdlog::debug("power flow converged in {} iterations, mismatch {:.2e}", res.iterations, res.max_mismatch);
    return res;
}

VerificationReport verify_opf_solution(const Feeder& f, const OPFSolution& sol, double tol) {
    VerificationReport rep;
    const auto exact = kernels::line_flows(f, sol.v);
    for (size_t l = 0; l < f.lines.size() && l < sol.flows.size(); ++l)
        for (size_t d = 0; d < 2; ++d)
            for (size_t k = 0; k < exact[l].s[d].size(); ++k) {
                const auto diff = exact[l].s[d][k] - sol.flows[l].s[d][k];
                rep.max_flow_mismatch = std::max({rep.max_flow_mismatch, std::abs(diff.real()), std::abs(diff.imag())});
            }
    auto inj = pv_node_injection(f, sol.pv);
    for (size_t i = 0; i < inj.size(); ++i) inj[i] += sol.substation[i];
    const auto dem = f.node_demand();
    const auto mis = kernels::nodal_mismatch(f, sol.v, inj, dem);
    for (size_t i = 0; i < mis.size(); ++i) {
        const double r = std::max(std::abs(mis[i].real()), std::abs(mis[i].imag()));
        if (r > rep.max_balance_residual) {
            rep.max_balance_residual = r;
            rep.worst_node = static_cast<int>(i);
        }
    }
    rep.pass = rep.max_flow_mismatch <= tol && rep.max_balance_residual <= tol;
    return rep;
}

std::string VerificationReport::to_json() const {
    nlohmann::ordered_json j;
    j["max_flow_mismatch"] = max_flow_mismatch;
    j["max_balance_residual"] = max_balance_residual;
    j["pass"] = pass;
    return j.dump(2);
}

}  // namespace socpf
