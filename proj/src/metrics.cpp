#include "socpf/metrics.hpp"

#include "socpf/common.hpp"

namespace socpf {

double cost_saving(double default_cost, double optimal_cost) {
    if (!(default_cost > 0)) throw PreconditionError("cost saving needs a positive default cost");
    return (default_cost - optimal_cost) / default_cost * 100.0;
}

double curtailment_percent(double p_available, double p_dispatched) {
    if (!(p_available > 0)) throw PreconditionError("curtailment needs positive available power");
    if (p_dispatched < 0 || p_dispatched > p_available)
        throw PreconditionError("dispatched power must lie in [0, available]");
    return (p_available - p_dispatched) / p_available * 100.0;
}

}  // namespace socpf
