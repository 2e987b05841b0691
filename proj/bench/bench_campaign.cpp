// Serial reference vs OpenMP campaign kernel, and the per-pair dwell kernel.

#include <vector>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "homsim/simkit.hpp"

using namespace homsim;

namespace {

CampaignSetup setup_with_scans(int n_scans)
{
    CampaignSetup s;
    s.plan.n_scans = n_scans;
    return s;
}

void BM_CampaignSerial(benchmark::State& state)
{
    const auto s = setup_with_scans(static_cast<int>(state.range(0)));
    std::vector<ScanRecord> out(static_cast<std::size_t>(s.plan.n_scans) * s.plan.n_points);
    for (auto _ : state) {
        kernels::simulate_cells_serial(s, SeedPolicy{1}, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

void BM_CampaignParallel(benchmark::State& state)
{
    const auto s = setup_with_scans(static_cast<int>(state.range(0)));
    omp_set_num_threads(static_cast<int>(state.range(1)));
    std::vector<ScanRecord> out(static_cast<std::size_t>(s.plan.n_scans) * s.plan.n_points);
    for (auto _ : state) {
        kernels::simulate_cells_parallel(s, SeedPolicy{1}, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

void BM_DwellBinomial(benchmark::State& state)
{
    const CampaignSetup s;
    auto rng = SeedPolicy{2}.substream(0, 0);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_dwell(s, {0.0, 1.0, 1.0}, rng));
}

void BM_DwellPerPair(benchmark::State& state)
{
    const CampaignSetup s;
    auto rng = SeedPolicy{2}.substream(0, 0);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_dwell_per_pair(s, {0.0, 1.0, 1.0}, rng));
}

}  // namespace

BENCHMARK(BM_CampaignSerial)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CampaignParallel)
    ->ArgsProduct({{25, 100}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_DwellBinomial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DwellPerPair)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
