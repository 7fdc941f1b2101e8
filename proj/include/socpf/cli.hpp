#pragma once

#include <string>
#include <vector>

#include "socpf/feeder.hpp"
#include "socpf/opf_model.hpp"

namespace socpf {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int verification_failed = 1;
inline constexpr int infeasible = 2;
inline constexpr int nonconvergence = 3;
inline constexpr int input_error = 4;
}  // namespace exit_code

/// Voltages, flows and injections of a solution in per-unit JSON.
std::string solution_to_json(const Feeder& f, const OPFSolution& sol);
/// Reads what solution_to_json wrote; enough to run verify_opf_solution.
OPFSolution solution_from_json(const Feeder& f, const std::string& text);

/// Command-line entry point with subcommands solve, compare, simulate, verify
/// and dump-model. Log verbosity comes from SOCPF_LOG (trace..off).
int run(int argc, const char* const* argv);

}  // namespace socpf
