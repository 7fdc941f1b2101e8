#pragma once

namespace socpf {

/// Percent cost reduction of the optimal-settings case relative to the default case.
double cost_saving(double default_cost, double optimal_cost);

/// Percent of available VVC active power that was not dispatched.
double curtailment_percent(double p_available, double p_dispatched);

}  // namespace socpf
