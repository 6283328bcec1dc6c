#include "bondflow/causality.hpp"
#include "bondflow/lti.hpp"
#include "bondflow/models.hpp"
#include "bondflow/ode.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_AssignCausality(benchmark::State& state) {
    const bondflow::BondGraph g = bondflow::lift_a_load();
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::assign(g));
}
BENCHMARK(BM_AssignCausality);

void BM_Derive(benchmark::State& state) {
    const bondflow::BondGraph g = bondflow::lift_a_load();
    const bondflow::CausalAssignment a = bondflow::assign(g);
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::derive(g, a));
}
BENCHMARK(BM_Derive);

// One right-hand-side evaluation, the inner loop of every integrator step.
void BM_Derivative(benchmark::State& state) {
    const bondflow::OdeSystem sys = bondflow::compile(bondflow::solenoid());
    const Eigen::VectorXd x = sys.initial_state();
    const Eigen::VectorXd u = sys.default_inputs(0.0);
    for (auto _ : state) benchmark::DoNotOptimize(sys.derivative(0.0, x, u));
}
BENCHMARK(BM_Derivative);

void BM_Extract(benchmark::State& state) {
    const bondflow::BondGraph g = bondflow::lift_a_load();
    const bondflow::OdeSystem sys = bondflow::compile(g);
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::extract(sys, g.probes()));
}
BENCHMARK(BM_Extract);

}  // namespace
