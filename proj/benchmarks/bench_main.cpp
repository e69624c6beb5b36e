#include <benchmark/benchmark.h>

#include "mkv/frozen.hpp"
#include "mkv/parametrix.hpp"
#include "mkv/rng.hpp"
#include "mkv/simulator.hpp"

using namespace mkv;

namespace {

const ScalarFlow& holder_flow() {
    static const ScalarFlow f = [] {
        SimulationConfig sc;
        sc.T = 0.5;
        sc.n_particles = 1000;
        return simulate_mkv(builtin_problem("holder-diffusion"), EmpiricalMeasure::gaussian(1, 1000, 0.3, 0.5, 42), sc)
            .flow;
    }();
    return f;
}

void BM_philox(benchmark::State& state) {
    PhiloxCounter ctr{0, 0, 0, 0};
    const PhiloxKey key{0x12345678u, 0x9abcdef0u};
    for (auto _ : state) {
        ctr = philox4x32_10(ctr, key);
        benchmark::DoNotOptimize(ctr);
    }
}
BENCHMARK(BM_philox);

void BM_normals(benchmark::State& state) {
    const NoiseStream ns(42);
    std::uint64_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(ns.normal(i++, 3));
}
BENCHMARK(BM_normals);

void BM_euler_maruyama(benchmark::State& state) {
    const CoefficientSet c = builtin_problem("holder-drift");
    SimulationConfig sc;
    sc.T = 0.5;
    sc.n_steps = 100;
    sc.n_particles = static_cast<std::size_t>(state.range(0));
    const ScalarFlow f = ScalarFlow::constant({0.0, 1.0}, 0.2, 0.2);
    const auto mu = EmpiricalMeasure::gaussian(1, sc.n_particles, 0.0, 1.0, 1);
    for (auto _ : state) benchmark::DoNotOptimize(euler_maruyama(c, f, mu, sc));
    state.SetItemsProcessed(state.iterations() * sc.n_steps * state.range(0));
}
BENCHMARK(BM_euler_maruyama)->Arg(1000)->Arg(10000);

void BM_picard(benchmark::State& state) {
    const CoefficientSet c = builtin_problem("holder-drift");
    SimulationConfig sc;
    sc.T = 0.25;
    sc.n_particles = 1000;
    const auto mu = EmpiricalMeasure::gaussian(1, 1000, 0.3, 0.5, 42);
    for (auto _ : state) benchmark::DoNotOptimize(picard_iterate(c, mu, sc));
}
BENCHMARK(BM_picard)->Unit(benchmark::kMillisecond);

void BM_frozen_moments(benchmark::State& state) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow& f = holder_flow();
    double y = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(frozen_moments(c, f, {y}, 0.05, 0.45));
        y += 1e-3;
    }
}
BENCHMARK(BM_frozen_moments);

void BM_kernel_H(benchmark::State& state) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow& f = holder_flow();
    const KernelSampler H(c, f);
    double y = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(H.H(0.1, 0.2, 0.3, y));
        y += 1e-4;
    }
}
BENCHMARK(BM_kernel_H);

void BM_iterate_kernel(benchmark::State& state) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow& f = holder_flow();
    ParametrixOptions o;
    o.slices = static_cast<int>(state.range(0));
    const KernelSampler H(c, f, o);
    const KernelTable k1 = sample_kernel(H, SpaceTimeGrid::build(c, f, 0.0, 0.3, 0.5, o));
    for (auto _ : state) benchmark::DoNotOptimize(iterate_kernel(k1, H));
}
BENCHMARK(BM_iterate_kernel)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_parametrix_density(benchmark::State& state) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow& f = holder_flow();
    for (auto _ : state) {
        ParametrixSolver s(c, f, 0.0, 0.3, 0.25, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(s.density(s.output_grid()));
    }
}
BENCHMARK(BM_parametrix_density)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
