#include <benchmark/benchmark.h>

#include <random>

#include "frisson/signal_core.hpp"
#include "frisson/simulator.hpp"

using namespace frisson;

namespace {

EdaSeries simulated(double duration_s) {
    sim::SimSpec spec;
    spec.duration_s = duration_s;
    for (double t = 15; t + 15 < duration_s; t += 30) spec.event_times_s.push_back(t);
    spec.drift_amplitude = 0.5;
    spec.noise_sigma = 0.02;
    spec.seed = 42;
    return sim::generate(spec).eda;
}

}  // namespace

// 5 Hz, so range(0) samples is range(0)/5 seconds of video.
static void BM_ProcessSession(benchmark::State& state) {
    const auto eda = simulated(static_cast<double>(state.range(0)) / 5.0);
    const PipelineConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(process_session(eda, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProcessSession)->RangeMultiplier(4)->Range(1 << 10, 1 << 16);

static void BM_DetectPeaks(benchmark::State& state) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> values(static_cast<std::size_t>(state.range(0)));
    for (auto& v : values) v = u(rng);
    const PipelineConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(detect_peaks(values, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DetectPeaks)->RangeMultiplier(4)->Range(1 << 10, 1 << 16);

static void BM_RemoveBaseline(benchmark::State& state) {
    const auto eda = simulated(static_cast<double>(state.range(0)) / 5.0);
    for (auto _ : state) benchmark::DoNotOptimize(remove_baseline(eda, 50));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RemoveBaseline)->Range(1 << 10, 1 << 16);

static void BM_Aggregate(benchmark::State& state) {
    const auto viewers = static_cast<std::size_t>(state.range(0));
    std::vector<FrissonSeries> series;
    std::mt19937_64 rng(3);
    for (std::size_t i = 0; i < viewers; ++i) {
        FrissonSeries s{5.0, std::vector<std::uint8_t>(1500, 0)};
        for (int k = 0; k < 10; ++k) s.values[rng() % s.size()] = 1;
        series.push_back(std::move(s));
    }
    for (auto _ : state) benchmark::DoNotOptimize(aggregate("bench", series));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 1500);
}
BENCHMARK(BM_Aggregate)->Arg(20)->Arg(200)->Arg(2000);
