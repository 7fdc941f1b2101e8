#include "socpf/kernels.hpp"

#include <cmath>

namespace socpf::kernels {

namespace {

std::vector<std::complex<double>> phasors(const VoltageState& v) {
    std::vector<std::complex<double>> out(v.mag.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::polar(v.mag[i], v.ang[i]);
    return out;
}

LineFlow flow_of(const Feeder& f, const LineBlock& line,
                 const std::vector<std::complex<double>>& ph) {
    LineFlow out;
    for (int d = 0; d < 2; ++d) {
        out.s[static_cast<size_t>(d)].resize(line.phases.size());
        for (size_t k = 0; k < line.phases.size(); ++k)
            out.s[static_cast<size_t>(d)][k] = line_phase_flow(f, line, d, static_cast<int>(k), ph);
    }
    return out;
}

void accumulate(const Feeder& f, const LineBlock& line, const LineFlow& fl, std::vector<std::complex<double>>& mis) {
    for (size_t k = 0; k < line.phases.size(); ++k) {
        mis[static_cast<size_t>(f.node_index(line.from, line.phases[k]))] -= fl.s[0][k];
        mis[static_cast<size_t>(f.node_index(line.to, line.phases[k]))] -= fl.s[1][k];
    }
}

PathErrorValues score(const PathValues& p, std::span<const double> u, std::span<const double> theta, double c,
                      double e) {
    const double ui = u[static_cast<size_t>(p.from)], uj = u[static_cast<size_t>(p.to)];
    const double m = std::sqrt(std::max(ui, 0.0) * std::max(uj, 0.0));
    const double d = theta[static_cast<size_t>(p.from)] - theta[static_cast<size_t>(p.to)];
    return {ui * uj - c * c - e * e, std::abs(c - m * std::cos(d)), std::abs(e - m * std::sin(d))};
}

}  // namespace

std::complex<double> line_phase_flow(const Feeder& f, const LineBlock& line, int direction, int k,
                                      const std::vector<std::complex<double>>& ph) {
    const std::string& here = direction == 0 ? line.from : line.to;
    const std::string& there = direction == 0 ? line.to : line.from;
    const auto vi = ph[static_cast<size_t>(f.node_index(here, line.phases[static_cast<size_t>(k)]))];
    std::complex<double> current = 0.0;
    for (size_t m = 0; m < line.phases.size(); ++m) {
        const std::complex<double> y(line.g(k, static_cast<Eigen::Index>(m)), line.b(k, static_cast<Eigen::Index>(m)));
        const auto a = ph[static_cast<size_t>(f.node_index(here, line.phases[m]))];
        const auto b = ph[static_cast<size_t>(f.node_index(there, line.phases[m]))];
        current += y * (a - b);
    }
    return vi * std::conj(current);
}

std::vector<LineFlow> line_flows_serial(const Feeder& f, const VoltageState& v) {
    const auto ph = phasors(v);
    std::vector<LineFlow> out(f.lines.size());
    for (size_t l = 0; l < f.lines.size(); ++l) out[l] = flow_of(f, f.lines[l], ph);
    return out;
}

std::vector<LineFlow> line_flows(const Feeder& f, const VoltageState& v) {
    const auto ph = phasors(v);
    std::vector<LineFlow> out(f.lines.size());
    const auto n = static_cast<long>(f.lines.size());
#pragma omp parallel for schedule(static)
    for (long l = 0; l < n; ++l) out[static_cast<size_t>(l)] = flow_of(f, f.lines[static_cast<size_t>(l)], ph);
    return out;
}

std::vector<std::complex<double>> nodal_mismatch_serial(const Feeder& f, const VoltageState& v,
                                                        std::span<const std::complex<double>> injection,
                                                        std::span<const std::complex<double>> demand) {
    std::vector<std::complex<double>> mis(static_cast<size_t>(f.num_nodes()));
    for (size_t i = 0; i < mis.size(); ++i) mis[i] = injection[i] - demand[i];
    const auto flows = line_flows_serial(f, v);
    for (size_t l = 0; l < f.lines.size(); ++l) accumulate(f, f.lines[l], flows[l], mis);
    return mis;
}

std::vector<std::complex<double>> nodal_mismatch(const Feeder& f, const VoltageState& v,
                                                 std::span<const std::complex<double>> injection,
                                                 std::span<const std::complex<double>> demand) {
    std::vector<std::complex<double>> mis(static_cast<size_t>(f.num_nodes()));
    for (size_t i = 0; i < mis.size(); ++i) mis[i] = injection[i] - demand[i];
    // flows are computed in parallel; the scatter stays ordered so sums are reproducible
    const auto flows = line_flows(f, v);
    for (size_t l = 0; l < f.lines.size(); ++l) accumulate(f, f.lines[l], flows[l], mis);
    return mis;
}

std::vector<PathErrorValues> path_errors_serial(std::span<const PathValues> paths, std::span<const double> u,
                                                std::span<const double> theta, std::span<const double> c,
                                                std::span<const double> e) {
    std::vector<PathErrorValues> out(paths.size());
    for (size_t p = 0; p < paths.size(); ++p) out[p] = score(paths[p], u, theta, c[p], e[p]);
    return out;
}

std::vector<PathErrorValues> path_errors(std::span<const PathValues> paths, std::span<const double> u,
                                         std::span<const double> theta, std::span<const double> c,
                                         std::span<const double> e) {
    std::vector<PathErrorValues> out(paths.size());
    const auto n = static_cast<long>(paths.size());
#pragma omp parallel for schedule(static)
    for (long p = 0; p < n; ++p) {
        const auto i = static_cast<size_t>(p);
        out[i] = score(paths[i], u, theta, c[i], e[i]);
    }
    return out;
}

}  // namespace socpf::kernels
