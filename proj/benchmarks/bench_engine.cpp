#include <benchmark/benchmark.h>

#include <random>

#include "slosim/engine.hpp"
#include "slosim/shaper.hpp"
#include "slosim/spec_io.hpp"

using namespace slosim;

namespace {

TrafficClassSpec google_class(double load_gbps, double sigma) {
    TrafficClassSpec c;
    c.name = "google";
    c.flow_sizes = load_cdf_file(bundled_data_dir() / "cdf" / "google.txt");
    c.interarrivals = LogNormalGap{mu_for_load(gbps(load_gbps), mean_flow_size(c.flow_sizes), sigma), sigma};
    c.slis.push_back(SliDef{"p99", Percentile{0.99}, std::nullopt});
    return c;
}

void BM_WaterFill(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<ByteCount> d(0, 5000);
    std::uniform_real_distribution<double> w(0.1, 1.0);
    std::vector<ByteCount> demand(n);
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) demand[i] = d(rng), weight[i] = w(rng);
    for (auto _ : state) benchmark::DoNotOptimize(water_fill(demand, weight, 3125));
}
BENCHMARK(BM_WaterFill)->Arg(3)->Arg(64)->Arg(1024);

// One enqueue per flow and one drain per step, as the engine does.
void BM_BottleneckStep(benchmark::State& state) {
    const QueueDiscipline d = state.range(1) ? QueueDiscipline{WeightedClasses{WithinClass::FairQueue}}
                                             : QueueDiscipline{WeightedClasses{WithinClass::Fifo}};
    const auto flows = static_cast<FlowId>(state.range(0));
    Bottleneck b(d, 3, gbps(100.0));
    const WeightAllocation weights({0.2, 0.3, 0.5});
    std::vector<DrainChunk> out;
    Nanos t = 0.0;
    const ByteCount per_flow = 3125 / static_cast<ByteCount>(flows);
    for (auto _ : state) {
        for (FlowId f = 0; f < flows; ++f) b.enqueue(static_cast<ClassId>(f % 3), f, per_flow);
        out.clear();
        b.drain(b.service_allocation(weights, 250.0), t, 250.0, out);
        t += 250.0;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BottleneckStep)->Args({16, 0})->Args({256, 0})->Args({16, 1})->Args({256, 1});

void BM_Simulate(benchmark::State& state) {
    SimConfig cfg;
    cfg.classes = {google_class(30.0, 2.0)};
    cfg.num_flows = static_cast<std::size_t>(state.range(0));
    const auto arrivals = generate_workload(cfg);
    for (auto _ : state) {
        const auto res = run_simulation(cfg, arrivals);
        state.counters["steps"] = static_cast<double>(res.counters.steps);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(5000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_Shaper(benchmark::State& state) {
    LeakyBucketParams p;
    p.sizes = ExponentialSize{10000.0};
    p.gaps = LogNormalGap{mu_for_load(gbps(9.5), 10000.0, 1.5), 1.5};
    for (auto _ : state) {
        Rng rng(1);
        benchmark::DoNotOptimize(simulate_shaper(p, 100000, rng));
    }
}
BENCHMARK(BM_Shaper)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
