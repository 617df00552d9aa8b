// Serial reference vs OpenMP batches for the fault-injected multiplier trials.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "mpim/reliability.hpp"

namespace {

mpim::MonteCarloConfig config(mpim::TmrMode mode) {
    mpim::MonteCarloConfig c;
    c.bit_width = 8;
    c.p_gate = 1e-4;
    c.trials = 8192;
    c.plan.mode = mode;
    return c;
}

void BM_serial(benchmark::State& state) {
    const auto cfg = config(static_cast<mpim::TmrMode>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(mpim::estimate_p_mult(cfg).failures);
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.trials));
}

void BM_openmp(benchmark::State& state) {
    const auto cfg = config(static_cast<mpim::TmrMode>(state.range(0)));
    const int jobs = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(mpim::estimate_p_mult_parallel(cfg, jobs).failures);
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.trials));
}

void jobs_grid(benchmark::internal::Benchmark* b) {
    const int max_jobs = omp_get_max_threads();
    for (int mode : {0, 1, 2}) {
        for (int j = 1; j <= max_jobs; j *= 2) b->Args({mode, j});
    }
}

}  // namespace

BENCHMARK(BM_serial)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_openmp)->Apply(jobs_grid)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
