#include "bondflow/models.hpp"
#include "bondflow/sim.hpp"

#include <benchmark/benchmark.h>

namespace {

void run(benchmark::State& state, const bondflow::BondGraph& g) {
    const bondflow::OdeSystem sys = bondflow::compile(g);
    bondflow::SimConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_end = 0.1;
    cfg.record_every = 10;
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::simulate(sys, cfg));
    state.counters["steps/s"] = benchmark::Counter(1000.0 * static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}

void BM_SimulateLift(benchmark::State& state) { run(state, bondflow::lift_a_load()); }
BENCHMARK(BM_SimulateLift)->Unit(benchmark::kMillisecond);

void BM_SimulateSolenoid(benchmark::State& state) { run(state, bondflow::solenoid()); }
BENCHMARK(BM_SimulateSolenoid)->Unit(benchmark::kMillisecond);

void BM_SimulateFilter(benchmark::State& state) { run(state, bondflow::filter_chopper()); }
BENCHMARK(BM_SimulateFilter)->Unit(benchmark::kMillisecond);

void BM_EnergyReport(benchmark::State& state) {
    bondflow::SimConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_end = 1.0;
    const bondflow::Trajectory tr = bondflow::simulate(bondflow::compile(bondflow::lift_a_load()), cfg);
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::energy_report(tr));
}
BENCHMARK(BM_EnergyReport)->Unit(benchmark::kMillisecond);

}  // namespace
