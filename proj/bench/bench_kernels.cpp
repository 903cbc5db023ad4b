// Serial reference vs OpenMP kernels, and direct vs separable kernel averages.
#include <benchmark/benchmark.h>
#include <omp.h>

#include "mvmc/estimators.hpp"
#include "mvmc/particles.hpp"

using namespace mvmc;

namespace {

int all_workers() { return omp_get_max_threads(); }

void particle_system(benchmark::State& state, KernelRoute route, bool parallel) {
    const ModelSpec m = kuramoto_model();
    const auto P = static_cast<std::size_t>(state.range(0));
    const std::size_t N = 64;
    const RandomBlock block(1, 1, P, N);
    const ParticleOptions opts{route, parallel ? all_workers() : 1};
    for (auto _ : state) benchmark::DoNotOptimize(simulate_particle_system(m, P, N, 1.0, block, opts).states().data());
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(P * N));
    state.counters["workers"] = opts.workers;
}

void level_estimate(benchmark::State& state, bool parallel) {
    const ModelSpec m = kuramoto_model();
    const Hierarchy h;
    EstimatorOptions opts;
    opts.workers = parallel ? all_workers() : 1;
    const int level = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(
            estimate_level(m, cos_observable(), ControlField::zero(), h, Sampler::antithetic, level, 16, 64, 3, opts)
                .mean);
    state.counters["workers"] = opts.workers;
}

}  // namespace

BENCHMARK_CAPTURE(particle_system, direct_serial, KernelRoute::direct, false)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK_CAPTURE(particle_system, direct_openmp, KernelRoute::direct, true)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK_CAPTURE(particle_system, separable_serial, KernelRoute::automatic, false)
    ->RangeMultiplier(4)
    ->Range(16, 1024);
BENCHMARK_CAPTURE(particle_system, separable_openmp, KernelRoute::automatic, true)
    ->RangeMultiplier(4)
    ->Range(16, 1024);
BENCHMARK_CAPTURE(level_estimate, serial, false)->DenseRange(1, 4);
BENCHMARK_CAPTURE(level_estimate, openmp, true)->DenseRange(1, 4);

BENCHMARK_MAIN();
