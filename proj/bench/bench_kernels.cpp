#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "json.hpp"

#include "socpf/feeder.hpp"
#include "socpf/kernels.hpp"
#include "socpf/opf_model.hpp"

using namespace socpf;

namespace {

// Radial three-phase chain with a side branch every fourth bus.
Feeder synthetic_feeder(int buses) {
    nlohmann::json doc;
    doc["bases"] = {{"mva", 1.0}, {"kv", 12.47}};
    doc["substation"] = {{"bus", "b0"}, {"v_pu", 1.0}};
    const nlohmann::json r = {{0.3465, 0.1560, 0.1580}, {0.1560, 0.3375, 0.1535}, {0.1580, 0.1535, 0.3414}};
    const nlohmann::json x = {{1.0179, 0.5017, 0.4236}, {0.5017, 1.0478, 0.3849}, {0.4236, 0.3849, 1.0348}};
    for (int b = 0; b < buses; ++b) doc["buses"].push_back({{"id", "b" + std::to_string(b)}});
    for (int b = 1; b < buses; ++b) {
        const int parent = b % 4 == 0 ? b / 2 : b - 1;
        doc["lines"].push_back({{"from", "b" + std::to_string(parent)},
                                {"to", "b" + std::to_string(b)},
                                {"phases", {"A", "B", "C"}},
                                {"r_ohm", r},
                                {"x_ohm", x},
                                {"length", 0.1}});
        for (const char* ph : {"A", "B", "C"})
            doc["loads"].push_back({{"bus", "b" + std::to_string(b)}, {"phase", ph}, {"p_kw", 10.0}, {"q_kvar", 3.0}});
    }
    return parse_feeder(doc.dump());
}

VoltageState perturbed(const Feeder& f) {
    VoltageState v = flat_start(f);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-0.02, 0.02);
    for (size_t i = 0; i < v.mag.size(); ++i) {
        v.mag[i] += d(rng);
        v.ang[i] += d(rng);
    }
    return v;
}

template <bool Parallel>
void BM_LineFlows(benchmark::State& state) {
    const Feeder f = synthetic_feeder(static_cast<int>(state.range(0)));
    const VoltageState v = perturbed(f);
    for (auto _ : state) {
        auto out = Parallel ? kernels::line_flows(f, v) : kernels::line_flows_serial(f, v);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.lines.size()));
}

template <bool Parallel>
void BM_NodalMismatch(benchmark::State& state) {
    const Feeder f = synthetic_feeder(static_cast<int>(state.range(0)));
    const VoltageState v = perturbed(f);
    const std::vector<std::complex<double>> inj(static_cast<size_t>(f.num_nodes()));
    const auto dem = f.node_demand();
    for (auto _ : state) {
        auto out = Parallel ? kernels::nodal_mismatch(f, v, inj, dem) : kernels::nodal_mismatch_serial(f, v, inj, dem);
        benchmark::DoNotOptimize(out);
    }
}

template <bool Parallel>
void BM_PathErrors(benchmark::State& state) {
    const Feeder f = synthetic_feeder(static_cast<int>(state.range(0)));
    const VoltageState v = perturbed(f);
    const auto paths = enumerate_aux_paths(f);
    std::vector<PathValues> pv;
    std::vector<double> u, c, e;
    for (double m : v.mag) u.push_back(m * m);
    for (const auto& p : paths) {
        pv.push_back({p.from, p.to});
        const double d = v.ang[static_cast<size_t>(p.from)] - v.ang[static_cast<size_t>(p.to)];
        const double m = v.mag[static_cast<size_t>(p.from)] * v.mag[static_cast<size_t>(p.to)];
        c.push_back(m * std::cos(d));
        e.push_back(m * std::sin(d));
    }
    for (auto _ : state) {
        auto out = Parallel ? kernels::path_errors(pv, u, v.ang, c, e) : kernels::path_errors_serial(pv, u, v.ang, c, e);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pv.size()));
}

}  // namespace

BENCHMARK(BM_LineFlows<false>)->Arg(64)->Arg(512)->Arg(2048);
BENCHMARK(BM_LineFlows<true>)->Arg(64)->Arg(512)->Arg(2048);
BENCHMARK(BM_NodalMismatch<false>)->Arg(64)->Arg(512)->Arg(2048);
BENCHMARK(BM_NodalMismatch<true>)->Arg(64)->Arg(512)->Arg(2048);
BENCHMARK(BM_PathErrors<false>)->Arg(64)->Arg(512)->Arg(2048);
BENCHMARK(BM_PathErrors<true>)->Arg(64)->Arg(512)->Arg(2048);

BENCHMARK_MAIN();
