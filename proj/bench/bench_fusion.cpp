#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "multidiffusion/fusion.hpp"
#include "multidiffusion/panorama.hpp"

using namespace mdiff;

namespace {

FusionPlan panorama(int width, int channels) {
    PanoramaSpec spec;
    spec.height = 64;
    spec.width = width;
    spec.channels = channels;
    spec.prompt = "stripes";
    return build_panorama_plan(spec);
}

std::vector<LatentGrid> targets_for(const FusionPlan& plan) {
    std::mt19937_64 gen(1);
    std::vector<LatentGrid> out;
    for (const auto& e : plan.entries) out.push_back(standard_normal(e.view.height(), e.view.width(), plan.channels, gen));
    return out;
}

DenoiserRegistry registry() {
    DenoiserRegistry r;
    r.add("stripes", std::make_shared<PatternDenoiser>(StripesPattern{8, {0.2f}, {0.8f}, false}, 0.5f));
    return r;
}

void BM_FuseParallel(benchmark::State& state) {
    const FusionPlan plan = panorama(static_cast<int>(state.range(0)), 4);
    const auto targets = targets_for(plan);
    for (auto _ : state) benchmark::DoNotOptimize(fuse(plan, targets));
}

void BM_FuseSerial(benchmark::State& state) {
    const FusionPlan plan = panorama(static_cast<int>(state.range(0)), 4);
    const auto targets = targets_for(plan);
    for (auto _ : state) benchmark::DoNotOptimize(reference::fuse(plan, targets));
}

void BM_SampleParallel(benchmark::State& state) {
    const FusionPlan plan = panorama(static_cast<int>(state.range(0)), 4);
    const auto s = desk_schedule(10);
    const auto r = registry();
    for (auto _ : state) benchmark::DoNotOptimize(multidiffusion_sample(plan, s, r));
}

void BM_SampleSerial(benchmark::State& state) {
    const FusionPlan plan = panorama(static_cast<int>(state.range(0)), 4);
    const auto s = desk_schedule(10);
    const auto r = registry();
    for (auto _ : state) benchmark::DoNotOptimize(reference::multidiffusion_sample(plan, s, r));
}

}  // namespace

BENCHMARK(BM_FuseParallel)->Arg(192)->Arg(576)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FuseSerial)->Arg(192)->Arg(576)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleParallel)->Arg(192)->Arg(576)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleSerial)->Arg(192)->Arg(576)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
