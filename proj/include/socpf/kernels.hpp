#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "socpf/feeder.hpp"

namespace socpf {

/// Complex flow on one line, indexed [direction][phase position in line.phases];
/// direction 0 is from -> to.
struct LineFlow {
    std::array<std::vector<std::complex<double>>, 2> s;
};

/// Node pair (i, j) of an auxiliary path with the values needed to score it.
struct PathValues {
    int from = 0;
    int to = 0;
};

struct PathErrorValues {
    double soc_error = 0.0;
    double delta_c = 0.0;
    double delta_e = 0.0;
};

namespace kernels {

/// Exact complex flow of one phase of a line as seen from one end.
std::complex<double> line_phase_flow(const Feeder& f, const LineBlock& line, int direction, int k,
                                      const std::vector<std::complex<double>>& phasor);

std::vector<LineFlow> line_flows_serial(const Feeder& f, const VoltageState& v);
std::vector<LineFlow> line_flows(const Feeder& f, const VoltageState& v);

/// Per-node complex mismatch injection - demand - sum of outgoing flows.
std::vector<std::complex<double>> nodal_mismatch_serial(const Feeder& f, const VoltageState& v,
                                                        std::span<const std::complex<double>> injection,
                                                        std::span<const std::complex<double>> demand);
std::vector<std::complex<double>> nodal_mismatch(const Feeder& f, const VoltageState& v,
                                                 std::span<const std::complex<double>> injection,
                                                 std::span<const std::complex<double>> demand);

/// SOC and linearization errors for each path given u, c, e, theta.
std::vector<PathErrorValues> path_errors_serial(std::span<const PathValues> paths, std::span<const double> u,
                                                std::span<const double> theta, std::span<const double> c,
                                                std::span<const double> e);
std::vector<PathErrorValues> path_errors(std::span<const PathValues> paths, std::span<const double> u,
                                         std::span<const double> theta, std::span<const double> c,
                                         std::span<const double> e);

}  // namespace kernels
}  // namespace socpf
