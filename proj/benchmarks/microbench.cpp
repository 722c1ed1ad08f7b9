#include <benchmark/benchmark.h>

#include <cmath>

#include "cwtune/backoff_models.hpp"
#include "cwtune/mac_sim.hpp"
#include "cwtune/online_learner.hpp"

using namespace cwtune;

namespace {

std::vector<models::TrainingSample> table_rows()
{
    std::vector<models::TrainingSample> s;
    for (int a = 1; a <= 2; ++a)
        for (int t = 1; t <= 5; ++t) s.push_back({double(a), double(t), std::exp(1.0 + a + 0.3 * t)});
    return s;
}

std::vector<learner::Observation> history(std::size_t n)
{
    std::vector<learner::Observation> out;
    Rng rng(3);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({uniform01(rng) * 3e8, static_cast<int>(uniform_int(rng, 0, 8)),
                       (1 << uniform_int(rng, 1, 10)) - 1, uniform01(rng) * 3e8,
                       learner::ObsKind::Calibration, static_cast<std::int64_t>(i)});
    }
    return out;
}

} // namespace

static void BM_SampleBackoff(benchmark::State& state)
{
    Rng rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mac::sample_backoff(63, rng));
    }
}
BENCHMARK(BM_SampleBackoff);

// One simulated second of n saturated stations.
static void BM_ChannelSecond(benchmark::State& state)
{
    mac::SimConfig cfg;
    const int n = static_cast<int>(state.range(0));
    mac::Channel ch(cfg, mac::make_stations(n, mac::default_beb()));
    const auto slots = cfg.slots_per(1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ch.run(slots).aggregate_tp_bps);
    }
}
BENCHMARK(BM_ChannelSecond)->Arg(2)->Arg(8)->Arg(32)->Unit(benchmark::kMicrosecond);

static void BM_RebuildCwMax(benchmark::State& state)
{
    const auto obs = history(static_cast<std::size_t>(state.range(0)));
    const learner::QuantScheme scheme;
    for (auto _ : state) {
        benchmark::DoNotOptimize(learner::rebuild_cwmax(std::span<const learner::Observation>(obs), scheme));
    }
}
BENCHMARK(BM_RebuildCwMax)->Arg(60)->Arg(600)->Arg(1200);

static void BM_LrFit(benchmark::State& state)
{
    const auto rows = table_rows();
    for (auto _ : state) {
        benchmark::DoNotOptimize(models::lr_fit(rows));
    }
}
BENCHMARK(BM_LrFit);

static void BM_NbFit(benchmark::State& state)
{
    const auto rows = table_rows();
    for (auto _ : state) {
        benchmark::DoNotOptimize(models::nb_fit(rows, 2, 5));
    }
}
BENCHMARK(BM_NbFit);

// A full refit as the learner does it: fresh init, 400 epochs.
static void BM_DnnFit(benchmark::State& state)
{
    const auto rows = table_rows();
    for (auto _ : state) {
        auto p = models::dnn_init({2, 10, 10, 1}, 5);
        Rng rng(2);
        benchmark::DoNotOptimize(models::dnn_fit(p, rows, 400, 4, rng));
    }
}
BENCHMARK(BM_DnnFit)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
